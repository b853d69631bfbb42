#include "ghzsim/source.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ghzsim/fock.hpp"
#include "ghzsim/rng.hpp"
#include "ghzsim/tomography.hpp"
#include "nelder_mead.hpp"

namespace ghzsim {

namespace {

// mode encoding: slot * 4 + pol * 2 + tag
// slots 0..5: signal_top, signal_bottom, pbs input a, pbs input b, port C,
// port D; slots 6..9 are the lost counterparts of the detection arms
constexpr uint16_t kSTop = 0, kSBot = 1, kInA = 2, kInB = 3, kPortC = 4, kPortD = 5;
constexpr uint16_t kLostBase = 6;
constexpr std::array<uint16_t, 4> kArmSlot{kSTop, kSBot, kPortC, kPortD};

constexpr uint16_t mode_id(uint16_t slot, int pol, int tag) {
    return static_cast<uint16_t>(slot * 4 + pol * 2 + tag);
}
constexpr uint16_t mode_slot(uint16_t m) { return static_cast<uint16_t>(m / 4); }
constexpr int mode_pol(uint16_t m) { return (m / 2) % 2; }
constexpr int mode_tag(uint16_t m) { return m % 2; }

double linear_extinction(double db) { return std::pow(10.0, -db / 10.0); }

// one pair from the top layer: (|H>_s |V>_a + e^{i theta} |V>_s |H>_a)/sqrt(2)
FockState pair_top(double theta) {
    const cxd c = 1.0 / std::sqrt(2.0);
    return FockState({
        {c, {mode_id(kSTop, 0, 0), mode_id(kInA, 1, 0)}},
        {c * std::exp(cxd(0, theta)), {mode_id(kSTop, 1, 0), mode_id(kInA, 0, 0)}},
    });
}

// bottom layer pair; its idler occupies sqrt(v) e0 + sqrt(1-v) e1
FockState pair_bottom(double theta, double v) {
    const cxd c = 1.0 / std::sqrt(2.0);
    const double a0 = std::sqrt(v), a1 = std::sqrt(1.0 - v);
    const cxd ph = std::exp(cxd(0, theta));
    std::vector<FockTerm> terms;
    if (a0 > 0) {
        terms.push_back({c * a0, {mode_id(kSBot, 0, 0), mode_id(kInB, 1, 0)}});
        terms.push_back({c * ph * a0, {mode_id(kSBot, 1, 0), mode_id(kInB, 0, 0)}});
    }
    if (a1 > 0) {
        terms.push_back({c * a1, {mode_id(kSBot, 0, 0), mode_id(kInB, 1, 1)}});
        terms.push_back({c * ph * a1, {mode_id(kSBot, 1, 0), mode_id(kInB, 0, 1)}});
    }
    return FockState(std::move(terms));
}

FockState emission_state(const SourceConfig& cfg, int k_top, int k_bottom) {
    FockState s = FockState::monomial({});
    for (int k = 0; k < k_top; ++k) s = s.product(pair_top(cfg.theta_top));
    for (int k = 0; k < k_bottom; ++k)
        s = s.product(pair_bottom(cfg.theta_bottom, cfg.overlap_v));
    s = s.simplified();
    return s * (1.0 / std::sqrt(s.norm_squared()));
}

// PBS substitution over both polarizations and tags; the asymmetric signs
// keep both per-polarization blocks unitary and give the ideal post-selected
// state a +1 relative phase (see source.hpp)
std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> pbs_columns(double eps) {
    const double t = std::sqrt(1.0 - eps), r = std::sqrt(eps);
    std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> cols;
    for (int tag = 0; tag < 2; ++tag) {
        cols[mode_id(kInA, 0, tag)] = {{mode_id(kPortC, 0, tag), t}, {mode_id(kPortD, 0, tag), -r}};
        cols[mode_id(kInB, 0, tag)] = {{mode_id(kPortC, 0, tag), r}, {mode_id(kPortD, 0, tag), t}};
        cols[mode_id(kInA, 1, tag)] = {{mode_id(kPortC, 1, tag), r}, {mode_id(kPortD, 1, tag), t}};
        cols[mode_id(kInB, 1, tag)] = {{mode_id(kPortC, 1, tag), t}, {mode_id(kPortD, 1, tag), -r}};
    }
    return cols;
}

// half-wave plate at 45 degrees in each fused output arm: H and V labels of
// the port photons are swapped before the collection fibers
std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> port_flip_columns() {
    std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> cols;
    for (uint16_t slot : {kPortC, kPortD}) {
        for (int tag = 0; tag < 2; ++tag) {
            cols[mode_id(slot, 0, tag)] = {{mode_id(slot, 1, tag), 1.0}};
            cols[mode_id(slot, 1, tag)] = {{mode_id(slot, 0, tag), 1.0}};
        }
    }
    return cols;
}

std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> fiber_columns(
    const std::array<LocalUnitary, 4>& fibers) {
    std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> cols;
    for (int arm = 0; arm < 4; ++arm) {
        const Mat2& u = fibers[arm].matrix();
        if ((u - Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-15) continue;
        const uint16_t slot = kArmSlot[arm];
        for (int tag = 0; tag < 2; ++tag) {
            for (int pol = 0; pol < 2; ++pol) {
                cols[mode_id(slot, pol, tag)] = {
                    {mode_id(slot, 0, tag), u(0, pol)},
                    {mode_id(slot, 1, tag), u(1, pol)},
                };
            }
        }
    }
    return cols;
}

std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> loss_columns(
    const std::array<double, 4>& eta) {
    std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> cols;
    for (int arm = 0; arm < 4; ++arm) {
        if (eta[arm] >= 1.0) continue;
        const double keep = std::sqrt(eta[arm]), drop = std::sqrt(1.0 - eta[arm]);
        const uint16_t slot = kArmSlot[arm];
        const uint16_t lost = static_cast<uint16_t>(kLostBase + arm);
        for (int tag = 0; tag < 2; ++tag) {
            for (int pol = 0; pol < 2; ++pol) {
                cols[mode_id(slot, pol, tag)] = {
                    {mode_id(slot, pol, tag), keep},
                    {mode_id(lost, pol, tag), drop},
                };
            }
        }
    }
    return cols;
}

std::array<int, 4> arm_counts(const FockTerm& t) {
    std::array<int, 4> n{0, 0, 0, 0};
    for (uint16_t m : t.modes) {
        const uint16_t s = mode_slot(m);
        for (int arm = 0; arm < 4; ++arm)
            if (s == kArmSlot[arm]) ++n[arm];
    }
    return n;
}

FockState filter_arm_counts(const FockState& s, const std::array<int, 4>& want) {
    std::vector<FockTerm> out;
    for (const auto& t : s.terms())
        if (arm_counts(t) == want) out.push_back(t);
    return FockState(std::move(out));
}

struct WeightedRho {
    double weight = 0.0;   // probability of the class
    Eigen::MatrixXcd rho;  // normalized; empty when weight is 0
};

// four survivors, one per arm: group terms by (lost modes, kept tags) and
// accumulate outer products of the 16-dim polarization amplitude vectors
WeightedRho fourfold_rho(const FockState& s) {
    std::map<std::vector<uint16_t>, Eigen::VectorXcd> groups;
    for (const auto& t : s.terms()) {
        int ket = 0;
        std::vector<uint16_t> env;
        std::array<int, 4> tag{0, 0, 0, 0};
        for (uint16_t m : t.modes) {
            const uint16_t slot = mode_slot(m);
            bool kept = false;
            for (int arm = 0; arm < 4; ++arm) {
                if (slot == kArmSlot[arm]) {
                    ket |= mode_pol(m) << (3 - arm);
                    tag[arm] = mode_tag(m);
                    kept = true;
                }
            }
            if (!kept) env.push_back(m);
        }
        for (int arm = 0; arm < 4; ++arm)
            env.push_back(static_cast<uint16_t>(1000 + tag[arm]));
        auto it = groups.try_emplace(env, Eigen::VectorXcd::Zero(16)).first;
        it->second(ket) += fock_amplitude(t);
    }
    WeightedRho out;
    if (groups.empty()) return out;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(16, 16);
    for (const auto& [env, vec] : groups) {
        rho += vec * vec.adjoint();
        out.weight += vec.squaredNorm();
    }
    if (out.weight > 0) out.rho = rho / out.weight;
    return out;
}

// five survivors with two photons in arm `doubled`: first-quantized state on
// five qubits (four arms in order, then the doubled arm's second photon);
// a pair in distinct modes enters both orderings with amplitude / sqrt(2)
WeightedRho fivefold_rho(const FockState& s, int doubled) {
    std::map<std::vector<uint16_t>, Eigen::VectorXcd> groups;
    for (const auto& t : s.terms()) {
        std::vector<uint16_t> env;
        std::array<std::vector<uint16_t>, 4> arm_modes;
        for (uint16_t m : t.modes) {
            const uint16_t slot = mode_slot(m);
            bool kept = false;
            for (int arm = 0; arm < 4; ++arm) {
                if (slot == kArmSlot[arm]) {
                    arm_modes[arm].push_back(m);
                    kept = true;
                }
            }
            if (!kept) env.push_back(m);
        }
        const cxd amp = fock_amplitude(t);
        const auto& pairm = arm_modes[doubled];
        struct Ordering {
            uint16_t first, second;
            cxd a;
        };
        std::vector<Ordering> ords;
        if (pairm[0] == pairm[1]) {
            ords.push_back({pairm[0], pairm[1], amp});
        } else {
            ords.push_back({pairm[0], pairm[1], amp / std::sqrt(2.0)});
            ords.push_back({pairm[1], pairm[0], amp / std::sqrt(2.0)});
        }
        for (const auto& o : ords) {
            int ket = 0;
            std::vector<uint16_t> key = env;
            for (int arm = 0; arm < 4; ++arm) {
                const uint16_t m = (arm == doubled) ? o.first : arm_modes[arm][0];
                ket |= mode_pol(m) << (4 - arm);
                key.push_back(static_cast<uint16_t>(1000 + mode_tag(m)));
            }
            ket |= mode_pol(o.second);
            key.push_back(static_cast<uint16_t>(1000 + mode_tag(o.second)));
            auto it = groups.try_emplace(key, Eigen::VectorXcd::Zero(32)).first;
            it->second(ket) += o.a;
        }
    }
    WeightedRho out;
    if (groups.empty()) return out;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(32, 32);
    for (const auto& [env, vec] : groups) {
        rho += vec * vec.adjoint();
        out.weight += vec.squaredNorm();
    }
    if (out.weight > 0) out.rho = rho / out.weight;
    return out;
}

Eigen::MatrixXcd trace_out_last_qubit(const Eigen::MatrixXcd& rho32) {
    Eigen::MatrixXcd r(16, 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            r(i, j) = rho32(2 * i, 2 * j) + rho32(2 * i + 1, 2 * j + 1);
    return r;
}

DensityMatrix to_density(const Eigen::MatrixXcd& m, int n_qubits) {
    Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
    h /= h.trace().real();
    return DensityMatrix(n_qubits, h);
}

// p-independent analysis of one configuration
struct PatternClasses {
    WeightedRho ff;                   // (1,1,1,1) survivors
    std::array<WeightedRho, 4> five;  // one arm doubled
};

struct SourceAnalysis {
    double success_probability = 0.0;  // (1,1): one photon per port, lossless
    Eigen::MatrixXcd rho_clean;        // normalized fused state
    double eta4 = 1.0;
    PatternClasses pat21, pat12;  // conditional on emission pattern
};

FockState propagate(const SourceConfig& cfg, int kt, int kb, bool with_loss) {
    FockState s = emission_state(cfg, kt, kb);
    s = s.apply_linear_map(pbs_columns(linear_extinction(cfg.extinction_db)));
    s = s.apply_linear_map(port_flip_columns());
    auto fib = fiber_columns(cfg.fiber_unitaries);
    if (!fib.empty()) s = s.apply_linear_map(fib);
    if (with_loss) {
        auto loss = loss_columns(cfg.arm_efficiency);
        if (!loss.empty()) s = s.apply_linear_map(loss);
    }
    return s;
}

PatternClasses classify_pattern(const SourceConfig& cfg, int kt, int kb) {
    PatternClasses out;
    FockState s = propagate(cfg, kt, kb, true);
    out.ff = fourfold_rho(filter_arm_counts(s, {1, 1, 1, 1}));
    for (int arm = 0; arm < 4; ++arm) {
        std::array<int, 4> want{1, 1, 1, 1};
        want[arm] = 2;
        out.five[arm] = fivefold_rho(filter_arm_counts(s, want), arm);
    }
    return out;
}

SourceAnalysis analyze_source(const SourceConfig& cfg) {
    cfg.validate();
    SourceAnalysis a;
    FockState clean = propagate(cfg, 1, 1, false);
    WeightedRho wr = fourfold_rho(filter_arm_counts(clean, {1, 1, 1, 1}));
    a.success_probability = wr.weight;
    a.rho_clean = wr.rho;
    a.eta4 = cfg.arm_efficiency[0] * cfg.arm_efficiency[1] * cfg.arm_efficiency[2] *
             cfg.arm_efficiency[3];
    a.pat21 = classify_pattern(cfg, 2, 1);
    a.pat12 = classify_pattern(cfg, 1, 2);
    return a;
}

struct Weights {
    double clean = 0.0;
    double contaminated = 0.0;          // fourfold classes of (2,1) and (1,2)
    Eigen::MatrixXcd rho_contaminated;  // normalized mixture
    std::array<double, 4> five{0, 0, 0, 0};
    std::array<Eigen::MatrixXcd, 4> rho_five;
};

Weights combine(const SourceAnalysis& a, const SourceConfig& cfg) {
    const EmissionStats pt = emission_distribution(cfg.p_top, cfg.n_max);
    const EmissionStats pb = emission_distribution(cfg.p_bottom, cfg.n_max);
    Weights w;
    w.clean = pt.distribution[1] * pb.distribution[1] * a.success_probability * a.eta4;

    const double e21 = pt.distribution[2] * pb.distribution[1];
    const double e12 = pt.distribution[1] * pb.distribution[2];

    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(16, 16);
    for (const auto& [e, pat] : {std::pair{e21, &a.pat21}, std::pair{e12, &a.pat12}}) {
        if (e <= 0) continue;
        if (pat->ff.weight > 0) {
            w.contaminated += e * pat->ff.weight;
            acc += e * pat->ff.weight * pat->ff.rho;
        }
        for (int arm = 0; arm < 4; ++arm) {
            if (pat->five[arm].weight <= 0) continue;
            const double wt = e * pat->five[arm].weight;
            if (w.five[arm] == 0.0) {
                w.rho_five[arm] = wt * pat->five[arm].rho;
            } else {
                w.rho_five[arm] += wt * pat->five[arm].rho;
            }
            w.five[arm] += wt;
        }
    }
    if (w.contaminated > 0) w.rho_contaminated = acc / w.contaminated;
    for (int arm = 0; arm < 4; ++arm)
        if (w.five[arm] > 0) w.rho_five[arm] /= w.five[arm];
    return w;
}

EventEnsemble ensemble_from(const SourceAnalysis& a, const SourceConfig& cfg) {
    Weights w = combine(a, cfg);
    EventEnsemble e{w.clean, to_density(a.rho_clean, 4), 0.0, std::nullopt, {0, 0, 0, 0}, {}};
    e.w_contaminated = w.contaminated;
    if (w.contaminated > 0) {
        Eigen::MatrixXcd rho = cfg.double_pair_white_noise
                                   ? Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(16, 16) / 16.0)
                                   : w.rho_contaminated;
        e.rho_contaminated = to_density(rho, 4);
    }
    for (int arm = 0; arm < 4; ++arm) {
        e.w_fivefold[arm] = w.five[arm];
        if (w.five[arm] > 0) {
            Eigen::MatrixXcd rho = cfg.double_pair_white_noise
                                       ? Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(32, 32) / 32.0)
                                       : w.rho_five[arm];
            e.rho_fivefold[arm] = to_density(rho, 5);
        }
    }
    return e;
}

RateReport rates_from(const SourceAnalysis& a, const SourceConfig& cfg) {
    Weights w = combine(a, cfg);
    RateReport r;
    const double R = cfg.pulse_rate_hz;
    auto add = [&](const char* pattern, EventClass cls, int arm, double weight) {
        if (weight <= 0) return;
        r.entries.push_back({pattern, cls, arm, weight, weight * R});
    };
    add("1+1", EventClass::fourfold_clean, -1, w.clean);
    const EmissionStats pt = emission_distribution(cfg.p_top, cfg.n_max);
    const EmissionStats pb = emission_distribution(cfg.p_bottom, cfg.n_max);
    const double e21 = pt.distribution[2] * pb.distribution[1];
    const double e12 = pt.distribution[1] * pb.distribution[2];
    add("2+1", EventClass::fourfold_contaminated, -1, e21 * a.pat21.ff.weight);
    add("1+2", EventClass::fourfold_contaminated, -1, e12 * a.pat12.ff.weight);
    for (int arm = 0; arm < 4; ++arm) {
        add("2+1", EventClass::fivefold, arm, e21 * a.pat21.five[arm].weight);
        add("1+2", EventClass::fivefold, arm, e12 * a.pat12.five[arm].weight);
    }
    double four = 0.0, five = 0.0;
    for (const auto& en : r.entries) {
        four += en.weight_per_pulse;
        if (en.cls == EventClass::fivefold) five += en.weight_per_pulse;
    }
    r.fourfold_rate_hz = four * R;
    r.fivefold_rate_hz = five * R;
    return r;
}

double rate_at_p(const SourceAnalysis& a, SourceConfig cfg, double p) {
    cfg.p_top = cfg.p_bottom = p;
    return rates_from(a, cfg).fourfold_rate_hz;
}

double p_for_rate_analyzed(const SourceAnalysis& a, const SourceConfig& cfg, double rate_hz) {
    if (rate_hz <= 0) return 0.0;
    double lo = 0.0, hi = 0.5;
    if (rate_at_p(a, cfg, hi) < rate_hz)
        throw std::runtime_error("p_for_rate: target rate unreachable");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rate_at_p(a, cfg, mid) < rate_hz ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// per-setting statistics of five-survivor events. The doubled arm's two
// photons pass one analyzer and the detectors do not resolve photon number:
// a pair landing on the same detector is indistinguishable from a plain
// fourfold at that sign, while a pair splitting across both detectors is
// recorded as a fivefold. A recorded fivefold also satisfies both fourfold
// patterns that agree with it on the three single arms, so coincidence
// counting books it into each of those histogram bins.
struct FiveStats {
    std::array<double, 16> fourfold_same{};                  // merged-pair bin additions
    std::vector<std::pair<FivefoldOutcome, double>> fives;   // recorded fivefolds
};

FiveStats five_stats(const EventEnsemble& ens, const MeasurementSetting& setting,
                     const Efficiencies& eff, double scale) {
    FiveStats out;
    std::array<std::pair<Eigen::Vector2cd, Eigen::Vector2cd>, 4> vecs;
    for (int k = 0; k < 4; ++k)
        vecs[k] = analyzer_vectors(setting.hwp_rad[k], setting.qwp_rad[k]);
    auto append = [](const Vec& v, const Eigen::Vector2cd& a) {
        Vec next(v.size() * 2);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            next(2 * i) = v(i) * a(0);
            next(2 * i + 1) = v(i) * a(1);
        }
        return next;
    };
    for (int arm = 0; arm < 4; ++arm) {
        if (!ens.rho_fivefold[arm] || ens.w_fivefold[arm] <= 0) continue;
        const Eigen::MatrixXcd& rho5 = ens.rho_fivefold[arm]->matrix();
        const double w5 = scale * ens.w_fivefold[arm];
        for (int rest = 0; rest < 8; ++rest) {
            FivefoldOutcome o;
            o.doubled_arm = arm;
            int bit = 0;
            for (int k = 0; k < 4; ++k) {
                if (k == arm) {
                    o.signs[k] = 0;
                    continue;
                }
                o.signs[k] = (rest >> (2 - bit)) & 1;
                ++bit;
            }
            // detection probability with the doubled arm's photons at the
            // given detector signs (slot order: four arms, then the duplicate)
            auto probe = [&](int arm_sign, int dup_sign) {
                Vec v = Vec::Ones(1);
                for (int k = 0; k < 4; ++k) {
                    const bool minus = (k == arm) ? (arm_sign == 1) : (o.signs[k] == 1);
                    v = append(v, minus ? vecs[k].second : vecs[k].first);
                }
                v = append(v, dup_sign == 1 ? vecs[arm].second : vecs[arm].first);
                return (v.adjoint() * rho5 * v).real()(0);
            };
            double eta_rest = 1.0;
            for (int k = 0; k < 4; ++k)
                if (k != arm && o.signs[k] == 0) eta_rest *= eff[k];
            // split pair: both detectors of the doubled arm fire
            const double cross = probe(0, 1) + probe(1, 0);
            out.fives.push_back({o, w5 * cross * eff[arm] * eta_rest});
            // merged pair: one detector fires once, the event looks fourfold
            for (int s = 0; s < 2; ++s) {
                const double ps = probe(s, s);
                int idx = 0;
                for (int k = 0; k < 4; ++k) idx |= ((k == arm) ? s : o.signs[k]) << (3 - k);
                out.fourfold_same[idx] += w5 * ps * (s == 0 ? eff[arm] : 1.0) * eta_rest;
            }
        }
    }
    return out;
}

// add each recorded fivefold to both fourfold bins it contains
void add_fivefold_subsets(std::vector<double>& n4,
                          const std::vector<std::pair<FivefoldOutcome, double>>& fives) {
    for (const auto& [o, n] : fives) {
        for (int s = 0; s < 2; ++s) {
            int idx = 0;
            for (int arm = 0; arm < 4; ++arm)
                idx |= ((arm == o.doubled_arm) ? s : o.signs[arm]) << (3 - arm);
            n4[idx] += n;
        }
    }
}

struct PointEval {
    double rate = 0.0;
    double f_raw = 0.0;
    double f_corrected = 0.0;
};

// noiseless fidelities at emission probability p: exact expected counts are
// pushed through reconstruction (raw) and correction plus reconstruction
PointEval eval_point(const SourceAnalysis& a, SourceConfig cfg, double p, double alpha,
                     const std::vector<MeasurementSetting>& settings, const LreDesign& design) {
    cfg.p_top = cfg.p_bottom = p;
    PointEval out;
    out.rate = rates_from(a, cfg).fourfold_rate_hz;
    EventEnsemble ens = ensemble_from(a, cfg);
    const PureState ghz = ghz_state(4, 0.0);

    const double w4 = ens.w_clean + ens.w_contaminated + ens.w_fivefold[0] + ens.w_fivefold[1] +
                      ens.w_fivefold[2] + ens.w_fivefold[3];
    if (w4 <= 0) {
        out.f_raw = out.f_corrected = fidelity(contaminated_state_from(ens), ghz);
        return out;
    }
    Eigen::MatrixXcd plain = ens.w_clean * ens.rho_clean.matrix();
    if (ens.rho_contaminated && ens.w_contaminated > 0)
        plain += ens.w_contaminated * ens.rho_contaminated->matrix();
    const Efficiencies eff{1, 1, 1, 1};
    std::vector<std::array<double, 16>> raw(settings.size());
    std::vector<std::array<double, 16>> corrected(settings.size());
    for (size_t is = 0; is < settings.size(); ++is) {
        const FiveStats fs = five_stats(ens, settings[is], eff, 1.0);
        std::vector<double> n4(16);
        for (int o = 0; o < 16; ++o) {
            const Mat proj = outcome_projector(settings[is], o);
            n4[o] = (proj * plain).trace().real() + fs.fourfold_same[o];
        }
        add_fivefold_subsets(n4, fs.fives);
        std::copy(n4.begin(), n4.end(), raw[is].begin());
        CorrectionResult corr = higher_order_correction(n4, fs.fives, alpha);
        std::copy(corr.corrected.begin(), corr.corrected.end(), corrected[is].begin());
    }
    out.f_raw = fidelity(mle_project(design.solve(raw)), ghz);
    out.f_corrected = fidelity(mle_project(design.solve(corrected)), ghz);
    return out;
}

}  // namespace

void SourceConfig::validate() const {
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (p_top < 0 || p_top >= 1 || p_bottom < 0 || p_bottom >= 1)
        throw std::invalid_argument("SourceConfig: pair probabilities must lie in [0,1)");
    if (!in01(overlap_v)) throw std::invalid_argument("SourceConfig: overlap_v outside [0,1]");
    if (extinction_db <= 0) throw std::invalid_argument("SourceConfig: extinction_db must be > 0");
    for (double e : arm_efficiency)
        if (!in01(e)) throw std::invalid_argument("SourceConfig: arm efficiency outside [0,1]");
    if (pulse_rate_hz <= 0) throw std::invalid_argument("SourceConfig: pulse_rate_hz must be > 0");
    if (n_max < 2) throw std::invalid_argument("SourceConfig: n_max must be at least 2");
}

EmissionStats emission_distribution(double p, int n_max) {
    if (p < 0 || p >= 1) throw std::invalid_argument("emission_distribution: p outside [0,1)");
    if (n_max < 0) throw std::invalid_argument("emission_distribution: negative n_max");
    EmissionStats s;
    s.distribution.resize(n_max + 1);
    double norm = 0.0, pk = 1.0;
    for (int k = 0; k <= n_max; ++k) {
        s.distribution[k] = pk;
        norm += pk;
        pk *= p;
    }
    for (double& v : s.distribution) v /= norm;
    return s;
}

FusionOutcome fuse_pairs(const SourceConfig& cfg) {
    SourceAnalysis a = analyze_source(cfg);
    RateReport r = rates_from(a, cfg);
    return {to_density(a.rho_clean, 4), a.success_probability, r.fourfold_rate_hz,
            r.fivefold_rate_hz};
}

RateReport coincidence_rates(const SourceConfig& cfg) {
    return rates_from(analyze_source(cfg), cfg);
}

EventEnsemble event_ensemble(const SourceConfig& cfg) {
    return ensemble_from(analyze_source(cfg), cfg);
}

DensityMatrix contaminated_state_from(const EventEnsemble& e) {
    double total = e.w_clean + e.w_contaminated;
    Eigen::MatrixXcd acc = e.w_clean * e.rho_clean.matrix();
    if (e.rho_contaminated) acc += e.w_contaminated * e.rho_contaminated->matrix();
    for (int arm = 0; arm < 4; ++arm) {
        if (!e.rho_fivefold[arm]) continue;
        acc += e.w_fivefold[arm] * trace_out_last_qubit(e.rho_fivefold[arm]->matrix());
        total += e.w_fivefold[arm];
    }
    if (total <= 0) return e.rho_clean;  // p -> 0 limit
    return to_density(acc / total, 4);
}

DensityMatrix contaminated_state(const SourceConfig& cfg) {
    return contaminated_state_from(event_ensemble(cfg));
}

CorrectionResult higher_order_correction(
    const std::vector<double>& fourfold_counts,
    const std::vector<std::pair<FivefoldOutcome, double>>& fivefold_counts, double alpha) {
    if (fourfold_counts.size() != 16)
        throw std::invalid_argument("higher_order_correction: need 16 fourfold bins");
    if (alpha < 0) throw std::invalid_argument("higher_order_correction: alpha must be >= 0");
    std::vector<double> sub(16, 0.0);
    for (const auto& [o, n] : fivefold_counts) {
        if (o.doubled_arm < 0 || o.doubled_arm > 3)
            throw std::invalid_argument("higher_order_correction: bad doubled arm");
        if (n < 0) throw std::invalid_argument("higher_order_correction: negative count");
        for (int arm = 0; arm < 4; ++arm)
            if (arm != o.doubled_arm && o.signs[arm] != 0 && o.signs[arm] != 1)
                throw std::invalid_argument("higher_order_correction: bad outcome sign");
        // both fourfold outcomes agreeing on the three single arms
        for (int xsign = 0; xsign < 2; ++xsign) {
            int idx = 0;
            for (int arm = 0; arm < 4; ++arm) {
                const int s = (arm == o.doubled_arm) ? xsign : o.signs[arm];
                idx |= s << (3 - arm);
            }
            sub[idx] += n;
        }
    }
    CorrectionResult out;
    out.corrected.resize(16);
    out.clamped.resize(16);
    for (int i = 0; i < 16; ++i) {
        const double c = fourfold_counts[i] - alpha * sub[i];
        out.clamped[i] = c < 0;
        out.corrected[i] = std::max(0.0, c);
    }
    return out;
}

double p_for_rate(const SourceConfig& cfg_template, double rate_hz) {
    SourceAnalysis a = analyze_source(cfg_template);
    return p_for_rate_analyzed(a, cfg_template, rate_hz);
}

std::vector<SweepRow> fidelity_rate_sweep(const SourceConfig& cfg_template,
                                          const std::vector<double>& p_values,
                                          const SweepOptions& options) {
    for (double p : p_values)
        if (p < 0 || p >= 1)
            throw std::invalid_argument("fidelity_rate_sweep: p outside [0,1)");
    SourceAnalysis a = analyze_source(cfg_template);
    const double alpha = options.alpha;
    const PureState ghz = ghz_state(4, 0.0);
    const auto settings = settings_97();
    const Efficiencies unit_eff{1, 1, 1, 1};

    std::vector<SweepRow> rows;
    for (size_t ip = 0; ip < p_values.size(); ++ip) {
        SourceConfig cfg = cfg_template;
        cfg.p_top = cfg.p_bottom = p_values[ip];
        SweepRow row;
        row.p = p_values[ip];
        row.rate_hz = rates_from(a, cfg).fourfold_rate_hz;

        EventEnsemble ens = ensemble_from(a, cfg);
        const double w4 = ens.w_clean + ens.w_contaminated + ens.w_fivefold[0] +
                          ens.w_fivefold[1] + ens.w_fivefold[2] + ens.w_fivefold[3];
        if (row.rate_hz <= 0 || w4 <= 0) {
            const double f = fidelity(contaminated_state_from(ens), ghz);
            row.fidelity_raw = row.fidelity_corrected = f;
            rows.push_back(row);
            continue;
        }
        const double pulses = options.seconds_per_setting * cfg.pulse_rate_hz;
        Eigen::MatrixXcd plain = ens.w_clean * ens.rho_clean.matrix();
        if (ens.rho_contaminated && ens.w_contaminated > 0)
            plain += ens.w_contaminated * ens.rho_contaminated->matrix();

        // expected fourfold and fivefold values per setting
        std::vector<std::array<double, 16>> mu4(settings.size());
        std::vector<std::vector<std::pair<FivefoldOutcome, double>>> mu5(settings.size());
        for (size_t is = 0; is < settings.size(); ++is) {
            const FiveStats fs = five_stats(ens, settings[is], unit_eff, pulses);
            std::vector<double> n4(16);
            for (int o = 0; o < 16; ++o) {
                const Mat proj = outcome_projector(settings[is], o);
                n4[o] = pulses * (proj * plain).trace().real() + fs.fourfold_same[o];
            }
            add_fivefold_subsets(n4, fs.fives);
            std::copy(n4.begin(), n4.end(), mu4[is].begin());
            mu5[is] = fs.fives;
        }

        // sample 0 is the realization, further samples are error replicas
        const int n_rep = options.noiseless ? 1 : std::max(1, options.mc_samples + 1);
        std::vector<double> f_raw(n_rep), f_cor(n_rep);
        std::vector<char> ok(n_rep, 1);
        auto run_sample = [&](int rep) {
            try {
                std::mt19937_64 rng =
                    make_engine(options.seed, "sweep", ip * 100003ULL + static_cast<uint64_t>(rep));
                std::normal_distribution<double> ang(0.0, options.angle_sigma_rad);
                std::vector<MeasurementSetting> setts = settings;
                std::vector<std::array<double, 16>> v4(settings.size());
                std::vector<std::array<double, 16>> v4c(settings.size());
                for (size_t is = 0; is < settings.size(); ++is) {
                    if (rep > 0 && options.angle_sigma_rad > 0) {
                        for (int k = 0; k < 4; ++k) {
                            setts[is].hwp_rad[k] += ang(rng);
                            setts[is].qwp_rad[k] += ang(rng);
                        }
                    }
                    std::vector<double> n4(16);
                    for (int o = 0; o < 16; ++o) {
                        if (options.noiseless || mu4[is][o] <= 0) {
                            n4[o] = std::max(mu4[is][o], 0.0);
                        } else {
                            std::poisson_distribution<long long> pd(mu4[is][o]);
                            n4[o] = static_cast<double>(pd(rng));
                        }
                    }
                    std::vector<std::pair<FivefoldOutcome, double>> n5 = mu5[is];
                    if (!options.noiseless) {
                        for (auto& [fo, mu] : n5) {
                            if (mu <= 0) continue;
                            std::poisson_distribution<long long> pd(mu);
                            mu = static_cast<double>(pd(rng));
                        }
                    }
                    std::copy(n4.begin(), n4.end(), v4[is].begin());
                    CorrectionResult corr = higher_order_correction(n4, n5, alpha);
                    std::copy(corr.corrected.begin(), corr.corrected.end(), v4c[is].begin());
                }
                LreDesign design(setts, unit_eff);
                f_raw[rep] = fidelity(mle_project(design.solve(v4)), ghz);
                f_cor[rep] = fidelity(mle_project(design.solve(v4c)), ghz);
            } catch (const std::exception&) {
                ok[rep] = 0;
            }
        };
        if (options.policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic)
            for (int rep = 0; rep < n_rep; ++rep) run_sample(rep);
        } else {
            for (int rep = 0; rep < n_rep; ++rep) run_sample(rep);
        }
        if (!ok[0]) throw std::runtime_error("fidelity_rate_sweep: reconstruction failed");
        row.fidelity_raw = f_raw[0];
        row.fidelity_corrected = f_cor[0];
        if (n_rep > 2) {
            auto stddev = [&](const std::vector<double>& f) {
                double mean = 0.0;
                int m = 0;
                for (int r = 1; r < n_rep; ++r)
                    if (ok[r]) {
                        mean += f[r];
                        ++m;
                    }
                if (m < 2) return 0.0;
                mean /= m;
                double var = 0.0;
                for (int r = 1; r < n_rep; ++r)
                    if (ok[r]) var += (f[r] - mean) * (f[r] - mean);
                return std::sqrt(var / (m - 1));
            };
            row.fidelity_raw_err = stddev(f_raw);
            row.fidelity_corrected_err = stddev(f_cor);
        }
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out.precision(10);
    out << "rate_hz,fidelity_raw,fidelity_raw_err,fidelity_corrected,fidelity_corrected_err\n";
    for (const auto& r : rows) {
        out << r.rate_hz << ',' << r.fidelity_raw << ',' << r.fidelity_raw_err << ','
            << r.fidelity_corrected << ',' << r.fidelity_corrected_err << '\n';
    }
    return out.str();
}

std::vector<CalibrationAnchor> reference_anchors() {
    return {{1.7, 0.9473, false}, {152.0, 0.8971, false}, {152.0, 0.9214, true}};
}

CalibrationResult calibrate_to_anchors(const SourceConfig& cfg_template,
                                       const std::vector<CalibrationAnchor>& anchors) {
    if (anchors.empty()) throw std::invalid_argument("calibrate_to_anchors: no anchors");
    const double base_mean =
        std::accumulate(cfg_template.arm_efficiency.begin(), cfg_template.arm_efficiency.end(),
                        0.0) /
        4.0;
    if (base_mean <= 0)
        throw std::invalid_argument("calibrate_to_anchors: zero template efficiency");
    double scale_max = 4.0;
    for (double e : cfg_template.arm_efficiency)
        if (e > 0) scale_max = std::min(scale_max, 1.0 / e);

    // parameters: x0 -> efficiency scale via logistic, x1 -> overlap via
    // logistic, x2 -> extinction in dB (clamped)
    auto make_cfg = [&](const Eigen::VectorXd& x) {
        SourceConfig c = cfg_template;
        const double s = scale_max / (1.0 + std::exp(-x(0)));
        for (auto& e : c.arm_efficiency) e *= s;
        c.overlap_v = 1.0 / (1.0 + std::exp(-x(1)));
        c.extinction_db = std::clamp(x(2), 10.0, 45.0);
        return c;
    };

    const auto settings = settings_97();
    const LreDesign design(settings, Efficiencies{1, 1, 1, 1});

    auto objective = [&](const Eigen::VectorXd& x, std::vector<double>* p_out) {
        SourceConfig c = make_cfg(x);
        SourceAnalysis a = analyze_source(c);
        const double alpha = SweepOptions{}.alpha;
        double sse = 0.0;
        if (p_out) p_out->clear();
        for (const auto& an : anchors) {
            double p;
            try {
                p = p_for_rate_analyzed(a, c, an.rate_hz);
            } catch (const std::runtime_error&) {
                if (p_out) p_out->push_back(0.0);
                sse += 1.0;
                continue;
            }
            PointEval ev = eval_point(a, c, p, alpha, settings, design);
            const double f = an.corrected ? ev.f_corrected : ev.f_raw;
            sse += (f - an.fidelity) * (f - an.fidelity);
            if (p_out) p_out->push_back(p);
        }
        return sse;
    };

    auto logit = [](double y) { return std::log(y / (1.0 - y)); };
    Eigen::VectorXd x0(3);
    x0 << logit(0.8), logit(std::clamp(cfg_template.overlap_v, 0.05, 0.99)),
        cfg_template.extinction_db;
    Eigen::VectorXd step(3);
    step << 0.7, 0.7, 3.0;
    detail::NmResult nm = detail::nelder_mead(
        [&](const Eigen::VectorXd& x) { return objective(x, nullptr); }, x0, step, 250, 1e-14,
        1e-12);

    CalibrationResult out;
    std::vector<double> ps;
    const double sse = objective(nm.x, &ps);
    out.cfg = make_cfg(nm.x);
    out.efficiency_scale = scale_max / (1.0 + std::exp(-nm.x(0)));
    out.residual = std::sqrt(sse / anchors.size());
    out.p_at_anchor = ps;
    return out;
}

}  // namespace ghzsim
