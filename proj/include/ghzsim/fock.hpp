#pragma once

// Small symbolic calculator for few-photon states written as sums of
// creation-operator monomials acting on vacuum:
//
//   |psi> = sum_t  coeff_t * a_{m1}^dag a_{m2}^dag ... |0>
//
// Modes are dense integer labels. A term stores its mode list sorted, so two
// terms with the same multiset of modes are the same monomial and their
// coefficients add. The normalized Fock amplitude of occupation pattern K
// with counts n_m is  coeff * sqrt(prod_m n_m!)  because
// (a^dag)^n |0> = sqrt(n!) |n>.
//
// Linear optics acts by substitution: a passive map sends a_m^dag to
// sum_m' U(m',m) a_{m'}^dag, and expanding the product of sums term by term
// is exact for the photon numbers used here (at most five photons).

#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

namespace ghzsim {

using cxd = std::complex<double>;

struct FockTerm {
    cxd coeff;
    std::vector<uint16_t> modes;  // sorted mode labels, one entry per photon
};

class FockState {
public:
    FockState() = default;
    explicit FockState(std::vector<FockTerm> terms);

    // single monomial with unit coefficient
    static FockState monomial(std::vector<uint16_t> modes, cxd coeff = 1.0);
    static FockState vacuum() { return FockState(); }

    const std::vector<FockTerm>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    // total photon number; throws if terms disagree
    int photon_number() const;

    FockState operator+(const FockState& other) const;
    FockState operator*(cxd scale) const;

    // tensor-style product: concatenates monomials of every term pair
    FockState product(const FockState& other) const;

    // applies a linear map on creation operators: mode m goes to
    // sum_k columns[m][k].second * a^dag_{columns[m][k].first}.
    // Modes without an entry are left unchanged.
    FockState apply_linear_map(
        const std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>>& columns) const;

    // drops terms whose monomial contains any of the given modes
    FockState without_modes(const std::vector<uint16_t>& modes) const;

    // keeps only terms whose monomial contains each given mode at least once
    FockState requiring_modes(const std::vector<uint16_t>& modes) const;

    // merges duplicate monomials and drops coefficients below tol
    FockState simplified(double tol = 1e-14) const;

    // sum over terms of |normalized Fock amplitude|^2
    double norm_squared() const;

private:
    std::vector<FockTerm> terms_;
};

// occupation map of a monomial: mode -> count
std::map<uint16_t, int> occupations(const FockTerm& term);

// normalized Fock-basis amplitude of a term, coeff * sqrt(prod n_m!)
cxd fock_amplitude(const FockTerm& term);

// Groups terms by their occupation restricted to `traced_modes` and, for each
// group, accumulates the outer product of normalized amplitudes on the
// `kept_basis` patterns. Rows/cols follow the order of kept_basis; patterns
// not listed are discarded. This is the partial trace of |psi><psi| over the
// traced modes, expressed in a caller-chosen kept-pattern basis (unnormalized;
// caller divides by the trace).
Eigen::MatrixXcd partial_trace_outer(
    const FockState& state, const std::vector<std::vector<uint16_t>>& kept_basis,
    const std::vector<uint16_t>& traced_modes);

}  // namespace ghzsim
