#pragma once

#include <cmath>
#include <stdexcept>

namespace vt {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }

    Vec3 normalized() const {
        double n = norm();
        if (n < 1e-300) throw std::runtime_error("cannot normalize zero vector");
        return *this / n;
    }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// World-space position in mm.
using WorldPoint = Vec3;

// Unit-norm direction. Constructed via make_direction to enforce the norm invariant.
using Direction = Vec3;

inline Direction make_direction(const Vec3& v) {
    Direction d = v.normalized();
    if (std::abs(d.norm() - 1.0) > 1e-9) throw std::runtime_error("direction not unit norm");
    return d;
}

inline double angle_between(const Vec3& a, const Vec3& b) {
    double c = a.dot(b) / (a.norm() * b.norm());
    c = std::max(-1.0, std::min(1.0, c));
    return std::acos(c);
}

}  // namespace vt
