#include "spinqsd/spin_algebra.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace spinqsd {

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error([&] {
          std::ostringstream os;
          os << "invalid configuration (" << violations.size() << " violation"
             << (violations.size() == 1 ? "" : "s") << ")";
          for (const auto& v : violations) os << "\n  - " << v;
          return os.str();
      }()),
      violations_(std::move(violations)) {}

SpinLength::SpinLength(int two_j) : two_j_(two_j) {
    if (two_j < 1) throw std::invalid_argument("spin length requires 2j >= 1");
}

SpinOps build_spin_operators(SpinLength j) {
    const int d = j.dim();
    const double jj = j.j();
    CMatrix jp = CMatrix::Zero(d, d);
    CMatrix jz = CMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const double m = jj - i;
        jz(i, i) = m;
        if (i > 0) jp(i - 1, i) = std::sqrt(jj * (jj + 1.0) - m * (m + 1.0));
    }
    CMatrix jm = jp.adjoint();
    SpinOps ops;
    ops.x = 0.5 * (jp + jm);
    ops.y = (jp - jm) / cplx(0.0, 2.0);
    ops.z = jz;
    return ops;
}

UnitVector3::UnitVector3(const Vec3& v) {
    const double norm = v.norm();
    if (!std::isfinite(norm) || norm == 0.0)
        throw std::invalid_argument("unit vector requires a finite non-zero input");
    v_ = v / norm;
}

UnitVector3 UnitVector3::from_angles(double theta, double phi) {
    return UnitVector3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                       std::cos(theta));
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

SpinVector bargmann_state(SpinLength j, BargmannLabel z, double z_max) {
    if (!(std::abs(z.value) <= z_max))
        throw std::out_of_range("Bargmann label exceeds z_max");
    const int d = j.dim();
    SpinVector out(d);
    cplx power = 1.0;
    for (int k = 0; k < d; ++k) {
        out[k] = std::sqrt(binomial(j.two_j(), k)) * power;
        power *= z.value;
    }
    return out;
}

SpinVector coherent_state(SpinLength j, const UnitVector3& n) {
    // Components sqrt(C(2j,k)) cos^{2j-k}(theta/2) sin^k(theta/2) e^{ik phi}; this is the
    // normalized Bargmann state written without the z -> infinity blow-up.
    const int d = j.dim();
    const double c = std::sqrt(std::max(0.0, 0.5 * (1.0 + n.z())));
    const double s = std::sqrt(std::max(0.0, 0.5 * (1.0 - n.z())));
    const double rho = std::hypot(n.x(), n.y());
    cplx phase = rho > 0.0 ? cplx(n.x() / rho, n.y() / rho) : cplx(1.0, 0.0);
    if (n.z() < -1.0 + 1e-12) {
        SpinVector south = SpinVector::Zero(d);
        south[d - 1] = 1.0;
        return south;
    }
    SpinVector out(d);
    cplx ph = 1.0;
    for (int k = 0; k < d; ++k) {
        out[k] = std::sqrt(binomial(j.two_j(), k)) * std::pow(c, j.two_j() - k) *
                 std::pow(s, k) * ph;
        ph *= phase;
    }
    return out;
}

BargmannLabel stereographic(const UnitVector3& n) {
    if (n.z() <= -1.0) throw PoleError("stereographic projection undefined at the south pole");
    cplx z;
    if (n.z() >= 0.0) {
        z = cplx(n.x(), n.y()) / (1.0 + n.z());
    } else {
        // (n_x + i n_y)/(1 + n_z) == (1 - n_z)/(n_x - i n_y); avoids cancellation in 1 + n_z.
        const cplx perp(n.x(), -n.y());
        if (perp == cplx(0.0))
            throw PoleError("stereographic projection undefined at the south pole");
        z = (1.0 - n.z()) / perp;
    }
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw PoleError("stereographic projection overflowed near the south pole");
    return BargmannLabel(z);
}

UnitVector3 inverse_stereographic(BargmannLabel z) {
    const double r2 = std::norm(z.value);
    const double denom = 1.0 + r2;
    return UnitVector3(2.0 * z.value.real() / denom, 2.0 * z.value.imag() / denom,
                       (1.0 - r2) / denom);
}

Rotation3 bare_rotation(double omega, double t) {
    const double c = std::cos(omega * t);
    const double s = std::sin(omega * t);
    Rotation3 o;
    o << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
    return o;
}

Mat3 cross_matrix(const Vec3& v) {
    Mat3 a;
    a << 0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0;
    return a;
}

Rotation3 axis_to_rotation(const UnitVector3& m) {
    // Rodrigues with unnormalized axis a = e_z x m, |a| = sin(theta):
    // R = I + [a]_x + (a a^T - |a|^2 I) / (1 + cos theta).
    const Vec3 a(-m.y(), m.x(), 0.0);
    const double s2 = a.squaredNorm();
    if (s2 == 0.0) {
        if (m.z() > 0.0) return Rotation3::Identity();
        return Vec3(1.0, -1.0, -1.0).asDiagonal();
    }
    const double one_plus_c = m.z() >= 0.0 ? 1.0 + m.z() : s2 / (1.0 - m.z());
    return Mat3::Identity() + cross_matrix(a) + (a * a.transpose() - s2 * Mat3::Identity()) / one_plus_c;
}

Rotation3 nearest_rotation(const Mat3& a) {
    Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3& v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return u * v.transpose();
}

double orthogonality_drift(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace spinqsd
