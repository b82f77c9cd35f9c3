#pragma once

// Exact dense statevector engine for up to six labeled qubits.
//
// The register is a list of labeled qubits; position 0 is the most
// significant bit of the basis-state index, so a state |a,b,c,e> on the
// layout (A,B,C,E) lives at amplitude index a*8 + b*4 + c*2 + e.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qkdlab/rng.hpp"

namespace qkdlab {

using Amplitude = std::complex<double>;

// Bad caller-supplied configuration (labels, sizes, flag values).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// A label that does not address a qubit of the register.
struct AddressError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// A state-level invariant was violated (e.g. discarding an entangled qubit).
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Numerical self-consistency failure inside the engine.
struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kMaxQubits = 6;
inline constexpr double kNormTol = 1e-12;
inline constexpr double kProbFloor = 1e-15;   // branch-pruning threshold
inline constexpr double kPurityTol = 1e-10;

class RegisterLayout {
public:
    RegisterLayout() = default;
    RegisterLayout(std::initializer_list<std::string> labels)
        : labels_(labels) { validate(); }
    explicit RegisterLayout(std::vector<std::string> labels)
        : labels_(std::move(labels)) { validate(); }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }

    bool contains(const std::string& label) const {
        return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
    }

    std::size_t position_of(const std::string& label) const {
        const auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end())
            throw AddressError("no qubit labeled '" + label + "' in register");
        return static_cast<std::size_t>(it - labels_.begin());
    }

    void insert(std::size_t position, const std::string& label) {
        if (contains(label))
            throw ConfigError("duplicate qubit label '" + label + "'");
        if (labels_.size() >= kMaxQubits)
            throw ConfigError("register limited to " + std::to_string(kMaxQubits) + " qubits");
        if (position > labels_.size())
            throw ConfigError("insert position out of range");
        labels_.insert(labels_.begin() + static_cast<std::ptrdiff_t>(position), label);
    }

    void erase(std::size_t position) {
        labels_.erase(labels_.begin() + static_cast<std::ptrdiff_t>(position));
    }

    bool operator==(const RegisterLayout&) const = default;

private:
    void validate() const {
        if (labels_.size() > kMaxQubits)
            throw ConfigError("register limited to " + std::to_string(kMaxQubits) + " qubits");
        for (std::size_t i = 0; i < labels_.size(); ++i)
            for (std::size_t j = i + 1; j < labels_.size(); ++j)
                if (labels_[i] == labels_[j])
                    throw ConfigError("duplicate qubit label '" + labels_[i] + "'");
    }

    std::vector<std::string> labels_;
};

class DensityMatrix {
public:
    explicit DensityMatrix(Eigen::MatrixXcd m) : m_(std::move(m)) { validate(); }

    Eigen::Index dim() const { return m_.rows(); }
    const Eigen::MatrixXcd& matrix() const { return m_; }
    Amplitude operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    double purity() const { return (m_ * m_).trace().real(); }

    // Ascending real eigenvalues.
    Eigen::VectorXd eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m_, Eigen::EigenvaluesOnly);
        return solver.eigenvalues();
    }

    // Von Neumann entropy in bits.
    double entropy_bits() const {
        const Eigen::VectorXd ev = eigenvalues();
        double h = 0.0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            const double p = ev[i];
            if (p > kProbFloor) h -= p * std::log2(p);
        }
        return h;
    }

private:
    void validate() const {
        if (m_.rows() != m_.cols() || m_.rows() == 0 || (m_.rows() & (m_.rows() - 1)) != 0)
            throw InternalError("density matrix dimension must be a power of two");
        if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kNormTol)
            throw InternalError("density matrix not Hermitian");
        if (std::abs(m_.trace().real() - 1.0) > kNormTol || std::abs(m_.trace().imag()) > kNormTol)
            throw InternalError("density matrix trace != 1");
        const Eigen::VectorXd ev = eigenvalues();
        if (ev.minCoeff() < -1e-10)
            throw InternalError("density matrix not positive semidefinite");
    }

    Eigen::MatrixXcd m_;
};

class StateVector {
public:
    StateVector(RegisterLayout layout, std::vector<Amplitude> amps)
        : layout_(std::move(layout)), amps_(std::move(amps)) {
        if (amps_.size() != (std::size_t{1} << layout_.size()))
            throw ConfigError("amplitude count does not match register size");
        enforce_norm();
    }

    static StateVector basis_state(RegisterLayout layout, std::span<const int> bits) {
        if (bits.size() != layout.size())
            throw ConfigError("bit count does not match register size");
        std::size_t index = 0;
        for (const int b : bits) {
            if (b != 0 && b != 1) throw ConfigError("basis bits must be 0 or 1");
            index = (index << 1) | static_cast<std::size_t>(b);
        }
        std::vector<Amplitude> amps(std::size_t{1} << layout.size(), Amplitude{0.0, 0.0});
        amps[index] = 1.0;
        return StateVector(std::move(layout), std::move(amps));
    }

    static StateVector basis_state(RegisterLayout layout, std::initializer_list<int> bits) {
        return basis_state(std::move(layout), std::span<const int>(bits.begin(), bits.size()));
    }

    // (|00> + |11>)/sqrt(2) on the two given labels.
    static StateVector bell_pair(const std::string& label_a, const std::string& label_b) {
        RegisterLayout layout{label_a, label_b};
        const double r = 1.0 / std::sqrt(2.0);
        return StateVector(std::move(layout), {r, 0.0, 0.0, r});
    }

    const RegisterLayout& layout() const { return layout_; }
    std::size_t num_qubits() const { return layout_.size(); }
    std::size_t dim() const { return amps_.size(); }
    const std::vector<Amplitude>& amplitudes() const { return amps_; }

    double norm() const {
        double s = 0.0;
        for (const auto& a : amps_) s += std::norm(a);
        return std::sqrt(s);
    }

    // Real rotation [[cos, sin], [-sin, cos]] on the addressed qubit.
    void apply_rotation(const std::string& label, double theta) {
        const double c = std::cos(theta), s = std::sin(theta);
        apply_1q(label, Amplitude{c, 0.0}, Amplitude{s, 0.0}, Amplitude{-s, 0.0}, Amplitude{c, 0.0});
    }

    void apply_x(const std::string& label) {
        apply_1q(label, 0.0, 1.0, 1.0, 0.0);
    }

    void apply_cnot(const std::string& control, const std::string& target) {
        const std::size_t cp = layout_.position_of(control);
        const std::size_t tp = layout_.position_of(target);
        if (cp == tp) throw AddressError("CNOT control and target must differ");
        const std::size_t cmask = mask_for(cp), tmask = mask_for(tp);
        for (std::size_t i = 0; i < amps_.size(); ++i)
            if ((i & cmask) && !(i & tmask))
                std::swap(amps_[i], amps_[i | tmask]);
        enforce_norm();
    }

    // Arbitrary two-qubit unitary; basis order |hi,lo> with `hi` the more
    // significant of the two (u is 4x4, row = out index, col = in index).
    void apply_unitary2(const std::string& hi, const std::string& lo, const Eigen::Matrix4cd& u) {
        const std::size_t hp = layout_.position_of(hi);
        const std::size_t lp = layout_.position_of(lo);
        if (hp == lp) throw AddressError("two-qubit unitary needs distinct labels");
        const std::size_t hmask = mask_for(hp), lmask = mask_for(lp);
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if ((i & hmask) || (i & lmask)) continue;
            const std::size_t idx[4] = {i, i | lmask, i | hmask, i | hmask | lmask};
            Amplitude in[4], out[4];
            for (int k = 0; k < 4; ++k) in[k] = amps_[idx[k]];
            for (int r = 0; r < 4; ++r) {
                out[r] = 0.0;
                for (int c = 0; c < 4; ++c) out[r] += u(r, c) * in[c];
            }
            for (int k = 0; k < 4; ++k) amps_[idx[k]] = out[k];
        }
        enforce_norm();
    }

    void attach_qubit(const std::string& label, int bit) {
        attach_qubit_at(layout_.size(), label, bit);
    }

    // Tensor-extends the register with |bit> inserted at `position`.
    void attach_qubit_at(std::size_t position, const std::string& label, int bit) {
        if (bit != 0 && bit != 1) throw ConfigError("attached bit must be 0 or 1");
        layout_.insert(position, label);
        const std::size_t n = layout_.size();
        const std::size_t shift = n - 1 - position;
        std::vector<Amplitude> next(std::size_t{1} << n, Amplitude{0.0, 0.0});
        for (std::size_t i = 0; i < next.size(); ++i) {
            if (((i >> shift) & 1) != static_cast<std::size_t>(bit)) continue;
            const std::size_t high = i >> (shift + 1);
            const std::size_t low = i & ((std::size_t{1} << shift) - 1);
            next[i] = amps_[(high << shift) | low];
        }
        amps_ = std::move(next);
        enforce_norm();
    }

    // Samples a Z measurement with Born probabilities, collapses in place.
    int measure_z(const std::string& label, Rng& rng) {
        const std::size_t shift = shift_for(label);
        const auto [p0, p1] = outcome_probabilities(shift);
        int bit;
        if (p1 < kProbFloor) bit = 0;
        else if (p0 < kProbFloor) bit = 1;
        else bit = rng.uniform01() < p0 ? 0 : 1;
        collapse(shift, bit, bit == 0 ? p0 : p1);
        return bit;
    }

    // Both measurement outcomes with exact probabilities; branches below the
    // pruning threshold are dropped. Defined after MeasurementBranch below.
    std::vector<struct MeasurementBranch> branch_measure_z(const std::string& label) const;

    // Removes a qubit that is in a product state with the rest of the
    // register. An entangled qubit signals a protocol-logic bug.
    void discard_qubit(const std::string& label) {
        const std::size_t position = layout_.position_of(label);
        const std::string keep[1] = {label};
        const DensityMatrix rho = reduced_density(keep);
        if (rho.purity() < 1.0 - kPurityTol)
            throw InvariantError("cannot discard entangled qubit '" + label + "'");
        // rho = |v><v|; recover v with v0 real nonnegative.
        Amplitude v0, v1;
        if (rho(0, 0).real() >= rho(1, 1).real()) {
            v0 = std::sqrt(rho(0, 0).real());
            v1 = rho(1, 0) / v0;
        } else {
            v1 = std::sqrt(rho(1, 1).real());
            v0 = rho(0, 1) / v1;
        }
        const std::size_t n = layout_.size();
        const std::size_t shift = n - 1 - position;
        std::vector<Amplitude> next(std::size_t{1} << (n - 1), Amplitude{0.0, 0.0});
        for (std::size_t j = 0; j < next.size(); ++j) {
            const std::size_t high = j >> shift;
            const std::size_t low = j & ((std::size_t{1} << shift) - 1);
            const std::size_t i0 = (high << (shift + 1)) | low;
            next[j] = std::conj(v0) * amps_[i0] + std::conj(v1) * amps_[i0 | (std::size_t{1} << shift)];
        }
        layout_.erase(position);
        amps_ = std::move(next);
        renormalize();
        enforce_norm();
    }

    // Partial trace over the complement of `keep` (row/column order follows
    // the order of `keep`).
    DensityMatrix reduced_density(std::span<const std::string> keep) const {
        if (keep.empty()) throw ConfigError("reduced density needs a nonempty label subset");
        std::vector<std::size_t> keep_shift;
        keep_shift.reserve(keep.size());
        for (const auto& label : keep) keep_shift.push_back(shift_for(label));
        std::vector<std::size_t> rest_shift;
        for (std::size_t p = 0; p < layout_.size(); ++p) {
            const std::size_t s = layout_.size() - 1 - p;
            if (std::find(keep_shift.begin(), keep_shift.end(), s) == keep_shift.end())
                rest_shift.push_back(s);
        }
        const std::size_t kd = std::size_t{1} << keep.size();
        const std::size_t rd = std::size_t{1} << rest_shift.size();
        const auto full_index = [&](std::size_t kept, std::size_t rest) {
            std::size_t idx = 0;
            for (std::size_t q = 0; q < keep_shift.size(); ++q)
                idx |= ((kept >> (keep_shift.size() - 1 - q)) & 1) << keep_shift[q];
            for (std::size_t q = 0; q < rest_shift.size(); ++q)
                idx |= ((rest >> (rest_shift.size() - 1 - q)) & 1) << rest_shift[q];
            return idx;
        };
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(kd),
                                                    static_cast<Eigen::Index>(kd));
        for (std::size_t r = 0; r < kd; ++r)
            for (std::size_t c = 0; c < kd; ++c) {
                Amplitude sum{0.0, 0.0};
                for (std::size_t e = 0; e < rd; ++e)
                    sum += amps_[full_index(r, e)] * std::conj(amps_[full_index(c, e)]);
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = sum;
            }
        return DensityMatrix(std::move(m));
    }

    DensityMatrix reduced_density(std::initializer_list<std::string> keep) const {
        return reduced_density(std::span<const std::string>(keep.begin(), keep.size()));
    }

private:
    std::size_t shift_for(const std::string& label) const {
        return layout_.size() - 1 - layout_.position_of(label);
    }
    std::size_t mask_for(std::size_t position) const {
        return std::size_t{1} << (layout_.size() - 1 - position);
    }

    void apply_1q(const std::string& label, Amplitude m00, Amplitude m01,
                  Amplitude m10, Amplitude m11) {
        const std::size_t mask = std::size_t{1} << shift_for(label);
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if (i & mask) continue;
            const Amplitude a0 = amps_[i], a1 = amps_[i | mask];
            amps_[i] = m00 * a0 + m01 * a1;
            amps_[i | mask] = m10 * a0 + m11 * a1;
        }
        enforce_norm();
    }

    std::pair<double, double> outcome_probabilities(std::size_t shift) const {
        double p0 = 0.0, p1 = 0.0;
        for (std::size_t i = 0; i < amps_.size(); ++i)
            ((i >> shift) & 1 ? p1 : p0) += std::norm(amps_[i]);
        if (std::abs(p0 + p1 - 1.0) > 1e-9)
            throw InternalError("measurement probabilities do not sum to 1");
        return {p0, p1};
    }

    void collapse(std::size_t shift, int bit, double probability) {
        const double scale = 1.0 / std::sqrt(probability);
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if (((i >> shift) & 1) == static_cast<std::size_t>(bit)) amps_[i] *= scale;
            else amps_[i] = 0.0;
        }
        enforce_norm();
    }

    void renormalize() {
        const double n = norm();
        if (n <= 0.0) throw InternalError("zero-norm state");
        for (auto& a : amps_) a /= n;
    }

    void enforce_norm() const {
        double s = 0.0;
        for (const auto& a : amps_) {
            if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
                throw InternalError("non-finite amplitude");
            s += std::norm(a);
        }
        if (std::abs(std::sqrt(s) - 1.0) > kNormTol)
            throw InternalError("state norm drifted from 1");
    }

    RegisterLayout layout_;
    std::vector<Amplitude> amps_;
};

struct MeasurementBranch {
    int bit;
    double probability;
    StateVector state;
};

inline std::vector<MeasurementBranch> StateVector::branch_measure_z(const std::string& label) const {
    const std::size_t shift = shift_for(label);
    const auto [p0, p1] = outcome_probabilities(shift);
    std::vector<MeasurementBranch> branches;
    for (int bit = 0; bit < 2; ++bit) {
        const double p = bit == 0 ? p0 : p1;
        if (p < kProbFloor) continue;
        StateVector post = *this;
        post.collapse(shift, bit, p);
        branches.push_back(MeasurementBranch{bit, p, std::move(post)});
    }
    return branches;
}

// |<a|b>|^2 -- global-phase-insensitive state comparison.
inline double phase_invariant_fidelity(const StateVector& a, const StateVector& b) {
    if (!(a.layout() == b.layout()))
        throw ConfigError("fidelity requires identical register layouts");
    Amplitude overlap{0.0, 0.0};
    for (std::size_t i = 0; i < a.dim(); ++i)
        overlap += std::conj(a.amplitudes()[i]) * b.amplitudes()[i];
    return std::norm(overlap);
}

} // namespace qkdlab
