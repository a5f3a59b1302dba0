#pragma once

#include <array>

#include "spinqsd/types.hpp"

namespace spinqsd {

inline constexpr double kDefaultZMax = 1e6;

/// Spin length j = two_j / 2 with two_j >= 1.
class SpinLength {
public:
    explicit SpinLength(int two_j);

    int two_j() const noexcept { return two_j_; }
    double j() const noexcept { return 0.5 * two_j_; }
    /// Hilbert-space dimension 2j+1.
    int dim() const noexcept { return two_j_ + 1; }

    friend bool operator==(SpinLength a, SpinLength b) noexcept { return a.two_j_ == b.two_j_; }

private:
    int two_j_;
};

/// Angular momentum matrices in the |j,m> basis, m = j ... -j.
struct SpinOps {
    CMatrix x, y, z;

    const CMatrix& operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
    /// c . J for a real 3-vector c.
    CMatrix dot(const Vec3& c) const { return c[0] * x + c[1] * y + c[2] * z; }
};

SpinOps build_spin_operators(SpinLength j);

class UnitVector3 {
public:
    /// Normalizes `v`; throws std::invalid_argument for a zero or non-finite vector.
    explicit UnitVector3(const Vec3& v);
    UnitVector3(double x, double y, double z) : UnitVector3(Vec3(x, y, z)) {}

    static UnitVector3 from_angles(double theta, double phi);
    static UnitVector3 e_x() { return UnitVector3(1, 0, 0); }
    static UnitVector3 e_y() { return UnitVector3(0, 1, 0); }
    static UnitVector3 e_z() { return UnitVector3(0, 0, 1); }

    const Vec3& vec() const noexcept { return v_; }
    double x() const noexcept { return v_[0]; }
    double y() const noexcept { return v_[1]; }
    double z() const noexcept { return v_[2]; }
    double dot(const UnitVector3& o) const noexcept { return v_.dot(o.v_); }

private:
    Vec3 v_;
};

/// Stereographic coordinate z = tan(theta/2) e^{i phi} of a point on the sphere.
struct BargmannLabel {
    cplx value{};

    BargmannLabel() = default;
    explicit BargmannLabel(cplx z) : value(z) {}
};

using SpinVector = CVector;

/// Thrown when the stereographic projection is asked for the south pole.
class PoleError : public Error {
public:
    using Error::Error;
};

/// Unnormalized Bargmann state e^{z J^-}|j,j>, components sqrt(C(2j,k)) z^k with k = j-m.
/// Throws std::out_of_range when |z| > z_max.
SpinVector bargmann_state(SpinLength j, BargmannLabel z, double z_max = kDefaultZMax);

/// Normalized coherent state |n> in the Bargmann gauge; |j,-j> at the south pole.
SpinVector coherent_state(SpinLength j, const UnitVector3& n);

BargmannLabel stereographic(const UnitVector3& n);
UnitVector3 inverse_stereographic(BargmannLabel z);

/// Free precession of a bath spin about e_z, as seen in the interaction picture.
Rotation3 bare_rotation(double omega, double t);

/// Geodesic rotation M with M e_z = m.
Rotation3 axis_to_rotation(const UnitVector3& m);

/// Matrix A with A w = v x w.
Mat3 cross_matrix(const Vec3& v);

/// Closest rotation in the Frobenius norm (polar factor).
Rotation3 nearest_rotation(const Mat3& a);

/// max |R^T R - I|.
double orthogonality_drift(const Mat3& r);

double binomial(int n, int k);

}  // namespace spinqsd
