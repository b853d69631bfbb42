#include "ghzsim/fock.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ghzsim {

namespace {

void sort_modes(FockTerm& t) { std::sort(t.modes.begin(), t.modes.end()); }

}  // namespace

FockState::FockState(std::vector<FockTerm> terms) : terms_(std::move(terms)) {
    for (auto& t : terms_) sort_modes(t);
}

FockState FockState::monomial(std::vector<uint16_t> modes, cxd coeff) {
    FockTerm t{coeff, std::move(modes)};
    sort_modes(t);
    return FockState({t});
}

int FockState::photon_number() const {
    if (terms_.empty()) return 0;
    const size_t n = terms_[0].modes.size();
    for (const auto& t : terms_) {
        if (t.modes.size() != n) {
            throw std::logic_error("FockState: mixed photon number");
        }
    }
    return static_cast<int>(n);
}

FockState FockState::operator+(const FockState& other) const {
    std::vector<FockTerm> out = terms_;
    out.insert(out.end(), other.terms_.begin(), other.terms_.end());
    return FockState(std::move(out));
}

FockState FockState::operator*(cxd scale) const {
    std::vector<FockTerm> out = terms_;
    for (auto& t : out) t.coeff *= scale;
    return FockState(std::move(out));
}

FockState FockState::product(const FockState& other) const {
    std::vector<FockTerm> out;
    out.reserve(terms_.size() * other.terms_.size());
    for (const auto& a : terms_) {
        for (const auto& b : other.terms_) {
            FockTerm t;
            t.coeff = a.coeff * b.coeff;
            t.modes = a.modes;
            t.modes.insert(t.modes.end(), b.modes.begin(), b.modes.end());
            out.push_back(std::move(t));
        }
    }
    return FockState(std::move(out));
}

FockState FockState::apply_linear_map(
    const std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>>& columns) const {
    std::vector<FockTerm> out;
    for (const auto& t : terms_) {
        // expand the product over photon slots one slot at a time
        std::vector<FockTerm> partial{{t.coeff, {}}};
        for (uint16_t m : t.modes) {
            auto it = columns.find(m);
            if (it == columns.end()) {
                for (auto& p : partial) p.modes.push_back(m);
                continue;
            }
            std::vector<FockTerm> next;
            next.reserve(partial.size() * it->second.size());
            for (const auto& p : partial) {
                for (const auto& [target, amp] : it->second) {
                    FockTerm q = p;
                    q.coeff *= amp;
                    q.modes.push_back(target);
                    next.push_back(std::move(q));
                }
            }
            partial = std::move(next);
        }
        out.insert(out.end(), partial.begin(), partial.end());
    }
    return FockState(std::move(out)).simplified();
}

FockState FockState::without_modes(const std::vector<uint16_t>& modes) const {
    std::vector<FockTerm> out;
    for (const auto& t : terms_) {
        bool hit = false;
        for (uint16_t m : modes) {
            if (std::binary_search(t.modes.begin(), t.modes.end(), m)) { hit = true; break; }
        }
        if (!hit) out.push_back(t);
    }
    return FockState(std::move(out));
}

FockState FockState::requiring_modes(const std::vector<uint16_t>& modes) const {
    std::vector<FockTerm> out;
    for (const auto& t : terms_) {
        bool ok = true;
        for (uint16_t m : modes) {
            if (!std::binary_search(t.modes.begin(), t.modes.end(), m)) { ok = false; break; }
        }
        if (ok) out.push_back(t);
    }
    return FockState(std::move(out));
}

FockState FockState::simplified(double tol) const {
    std::map<std::vector<uint16_t>, cxd> acc;
    for (const auto& t : terms_) acc[t.modes] += t.coeff;
    std::vector<FockTerm> out;
    for (auto& [modes, coeff] : acc) {
        if (std::abs(coeff) > tol) out.push_back({coeff, modes});
    }
    return FockState(std::move(out));
}

double FockState::norm_squared() const {
    const FockState s = simplified(0.0);
    double n2 = 0.0;
    for (const auto& t : s.terms()) n2 += std::norm(fock_amplitude(t));
    return n2;
}

std::map<uint16_t, int> occupations(const FockTerm& term) {
    std::map<uint16_t, int> occ;
    for (uint16_t m : term.modes) ++occ[m];
    return occ;
}

cxd fock_amplitude(const FockTerm& term) {
    double f = 1.0;
    int run = 1;
    for (size_t k = 1; k < term.modes.size(); ++k) {
        if (term.modes[k] == term.modes[k - 1]) {
            ++run;
            f *= run;
        } else {
            run = 1;
        }
    }
    return term.coeff * std::sqrt(f);
}

Eigen::MatrixXcd partial_trace_outer(
    const FockState& state, const std::vector<std::vector<uint16_t>>& kept_basis,
    const std::vector<uint16_t>& traced_modes) {
    const FockState s = state.simplified(0.0);

    std::vector<std::vector<uint16_t>> kept_sorted = kept_basis;
    for (auto& k : kept_sorted) std::sort(k.begin(), k.end());
    auto kept_index = [&](const std::vector<uint16_t>& kept) -> int {
        for (size_t k = 0; k < kept_sorted.size(); ++k) {
            if (kept_sorted[k] == kept) return static_cast<int>(k);
        }
        return -1;
    };

    std::vector<uint16_t> traced = traced_modes;
    std::sort(traced.begin(), traced.end());

    // traced occupation pattern -> amplitude vector over kept basis
    std::map<std::vector<uint16_t>, Eigen::VectorXcd> groups;
    const int d = static_cast<int>(kept_basis.size());
    for (const auto& t : s.terms()) {
        std::vector<uint16_t> kept, env;
        for (uint16_t m : t.modes) {
            if (std::binary_search(traced.begin(), traced.end(), m)) env.push_back(m);
            else kept.push_back(m);
        }
        const int idx = kept_index(kept);
        if (idx < 0) continue;
        auto [it, inserted] = groups.try_emplace(env, Eigen::VectorXcd::Zero(d));
        it->second(idx) += fock_amplitude(t);
    }

    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    for (const auto& [env, vec] : groups) rho += vec * vec.adjoint();
    return rho;
}

}  // namespace ghzsim
