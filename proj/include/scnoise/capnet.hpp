#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scnoise/errors.hpp"
#include "scnoise/netlist.hpp"
#include "scnoise/union_find.hpp"

namespace scnoise {

// Capacitance or the distinguished INFINITE outcome (port shorted).
class ExtCap {
public:
    ExtCap() = default;
    static ExtCap infinite() {
        ExtCap c;
        c.infinite_ = true;
        return c;
    }
    static ExtCap of(double farads) {
        ExtCap c;
        c.value_ = farads;
        return c;
    }

    bool is_infinite() const { return infinite_; }
    bool is_zero() const { return !infinite_ && value_ == 0.0; }
    double value() const {
        if (infinite_) throw Error("ExtCap: value() on INFINITE");
        return value_;
    }
    // 1/INFINITE == 0; 1/0 == +inf
    double reciprocal() const {
        if (infinite_) return 0.0;
        if (value_ == 0.0) return std::numeric_limits<double>::infinity();
        return 1.0 / value_;
    }
    double as_double() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

    bool operator==(const ExtCap& o) const { return infinite_ == o.infinite_ && (infinite_ || value_ == o.value_); }

private:
    bool infinite_ = false;
    double value_ = 0.0;
};

using ChargeState = std::map<std::string, double>;

struct Edge {
    std::string a;
    std::string b;
};

struct CapMatrix {
    std::vector<std::string> nodes;  // node names, index i
    std::vector<int> group;          // node i -> supernode
    int ground = 0;                  // ground supernode
    Eigen::MatrixXd matrix;          // over supernodes, ground row included

    int supernode(const std::string& n) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == n) return group[i];
        throw Error("node '" + n + "' not in capacitance network");
    }
    int size() const { return static_cast<int>(matrix.rows()); }
};

// ============================================================================
// Construction
// ============================================================================

inline CapMatrix build(const std::vector<std::string>& nodes, const std::vector<Capacitor>& caps,
                       const std::vector<Edge>& shorts, const std::string& ground) {
    CapMatrix m;
    m.nodes.push_back(ground);
    for (const auto& n : nodes)
        if (n != ground) m.nodes.push_back(n);
    auto index = [&](const std::string& n) -> std::size_t {
        for (std::size_t i = 0; i < m.nodes.size(); ++i)
            if (m.nodes[i] == n) return i;
        m.nodes.push_back(n);
        return m.nodes.size() - 1;
    };
    for (const auto& c : caps) {
        index(c.a);
        index(c.b);
    }
    for (const auto& e : shorts) {
        index(e.a);
        index(e.b);
    }
    detail::UnionFind uf(m.nodes.size());
    for (const auto& e : shorts) uf.unite(index(e.a), index(e.b));
    int count = 0;
    m.group = uf.labels(&count);
    m.ground = m.group[0];
    m.matrix = Eigen::MatrixXd::Zero(count, count);
    for (const auto& c : caps) {
        int a = m.group[index(c.a)], b = m.group[index(c.b)];
        if (a == b) continue;
        m.matrix(a, a) += c.value;
        m.matrix(b, b) += c.value;
        m.matrix(a, b) -= c.value;
        m.matrix(b, a) -= c.value;
    }
    return m;
}

inline CapMatrix build(const std::vector<Capacitor>& caps, const std::vector<Edge>& shorts, const std::string& ground) {
    return build({}, caps, shorts, ground);
}

namespace detail {

// Supernodes reachable from `start` over nonzero capacitances, not expanding
// through any supernode flagged in `stop`.
inline std::vector<int> reach(const Eigen::MatrixXd& m, int start, const std::vector<bool>& stop) {
    const int n = static_cast<int>(m.rows());
    std::vector<bool> seen(n, false);
    std::vector<int> order{start}, stack{start};
    seen[start] = true;
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        if (i != start && stop[i]) continue;
        for (int j = 0; j < n; ++j) {
            if (seen[j] || m(i, j) == 0.0) continue;
            seen[j] = true;
            order.push_back(j);
            stack.push_back(j);
        }
    }
    return order;
}

}  // namespace detail

// ============================================================================
// Queries
// ============================================================================

inline ExtCap equivalent_capacitance(const CapMatrix& m, const std::string& k, const std::string& l) {
    const int sk = m.supernode(k), sl = m.supernode(l);
    if (sk == sl) return ExtCap::infinite();
    std::vector<bool> none(m.size(), false);
    auto comp = detail::reach(m.matrix, sk, none);
    if (std::find(comp.begin(), comp.end(), sl) == comp.end()) return ExtCap::of(0.0);
    // ground sl, inject unit "current" at sk
    std::vector<int> keep;
    int pos_k = -1;
    for (int s : comp) {
        if (s == sl) continue;
        if (s == sk) pos_k = static_cast<int>(keep.size());
        keep.push_back(s);
    }
    Eigen::MatrixXd red = m.matrix(keep, keep);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keep.size()));
    rhs(pos_k) = 1.0;
    Eigen::VectorXd x = red.partialPivLu().solve(rhs);
    return ExtCap::of(1.0 / x(pos_k));
}

inline double transfer_gain(const CapMatrix& m, const std::map<std::string, double>& driven, const std::string& observe) {
    const int n = m.size();
    std::vector<bool> fixed(n, false);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    fixed[m.ground] = true;
    double total = 0.0;
    for (const auto& [node, volts] : driven) {
        int s = m.supernode(node);
        if (fixed[s] && v(s) != volts) throw Error("driven node '" + node + "' conflicts with another fixed potential");
        fixed[s] = true;
        v(s) = volts;
        total += volts;
    }
    const int so = m.supernode(observe);
    if (fixed[so]) throw Error("observed node '" + observe + "' is driven");
    if (total == 0.0) throw Error("transfer_gain: zero total excitation");
    auto region = detail::reach(m.matrix, so, fixed);
    std::vector<int> unknown, known;
    for (int s : region) (fixed[s] ? known : unknown).push_back(s);
    if (known.empty()) throw Error("indeterminate node '" + observe + "': no capacitive path to a driven node");
    Eigen::MatrixXd luu = m.matrix(unknown, unknown);
    Eigen::VectorXd rhs = -m.matrix(unknown, known) * v(known);
    Eigen::VectorXd x = luu.partialPivLu().solve(rhs);
    return x(0) / total;  // region[0] == so
}

// ============================================================================
// Charge redistribution
// ============================================================================

struct Settled {
    ChargeState charges;
    std::map<std::string, double> voltages;  // per circuit node
};

// Settled end-of-phase state. Ground/sources at 0 V, OTA inputs pinned at 0 V
// (their supernode still conserves charge), OTA output supernodes free,
// everything else conserves charge. Capacitors in `held` keep the given charge;
// supernode totals always come from q0.
inline Settled settle(const PhaseView& pv, const ChargeState& q0, const ChargeState& held = {}) {
    const Circuit& c = *pv.circuit;
    for (const auto& [name, q] : q0)
        if (!c.find_capacitor(name)) throw Error("charge given for unknown capacitor '" + name + "'");
    for (const auto& [name, q] : held)
        if (!c.find_capacitor(name)) throw Error("held charge for unknown capacitor '" + name + "'");

    int ns = 0;
    auto lab = phase_supernodes(pv, &ns);
    auto sn = [&](const std::string& node) { return lab[c.node_index(node)]; };

    std::vector<bool> pinned(ns, false), free_out(ns, false);
    pinned[0] = true;
    for (const auto& o : c.otas) {
        pinned[sn(o.input)] = true;
        free_out[sn(o.output)] = true;
    }

    Eigen::VectorXd total = Eigen::VectorXd::Zero(ns);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(ns, ns);
    for (const auto& cap : c.capacitors) {
        int a = sn(cap.a), b = sn(cap.b);
        auto it = q0.find(cap.name);
        double q = it == q0.end() ? 0.0 : it->second;
        total(a) += q;
        total(b) -= q;
        auto h = held.find(cap.name);
        if (h != held.end()) {
            total(a) -= h->second;
            total(b) += h->second;
            continue;
        }
        if (a == b) continue;
        lap(a, a) += cap.value;
        lap(b, b) += cap.value;
        lap(a, b) -= cap.value;
        lap(b, a) -= cap.value;
    }

    std::vector<int> unknown, rows;
    for (int s = 1; s < ns; ++s) {
        bool has_caps = lap(s, s) != 0.0;
        if (!pinned[s] && has_caps) unknown.push_back(s);
        if (!free_out[s] && (has_caps || total(s) != 0.0)) rows.push_back(s);
    }
    for (const auto& o : c.otas) {
        int so = sn(o.output);
        if (so != 0 && !pinned[so] && lap(so, so) == 0.0)
            throw AnalysisError("OTA " + o.name + " has no capacitive feedback in phase " + pv.phase);
    }

    Eigen::VectorXd v = Eigen::VectorXd::Zero(ns);
    if (!unknown.empty() || !rows.empty()) {
        Eigen::MatrixXd a = lap(rows, unknown);
        Eigen::VectorXd rhs = total(rows);
        double scale = a.size() > 0 ? a.cwiseAbs().maxCoeff() : 0.0;
        if (scale == 0.0) scale = 1.0;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknown.size()));
        if (!unknown.empty()) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
            lu.setThreshold(1e-12);
            x = lu.solve(rhs);
            if (lu.rank() < static_cast<Eigen::Index>(unknown.size())) {
                // a null direction is harmless only if it moves no capacitor charge
                Eigen::MatrixXd ker = lu.kernel();
                for (Eigen::Index k = 0; k < ker.cols(); ++k) {
                    Eigen::VectorXd dv = Eigen::VectorXd::Zero(ns);
                    for (std::size_t u = 0; u < unknown.size(); ++u) dv(unknown[u]) = ker(static_cast<Eigen::Index>(u), k);
                    double worst = 0.0, ref = 0.0;
                    for (const auto& cap : c.capacitors) {
                        if (held.count(cap.name)) continue;
                        worst = std::max(worst, std::abs(cap.value * (dv(sn(cap.a)) - dv(sn(cap.b)))));
                        ref = std::max(ref, cap.value * dv.cwiseAbs().maxCoeff());
                    }
                    if (worst > 1e-9 * ref) {
                        std::string who;
                        for (const auto& o : c.otas)
                            if (dv(sn(o.output)) != 0.0) who = o.name;
                        if (!who.empty())
                            throw AnalysisError("singular charge constraints: OTA " + who +
                                                " has no capacitive feedback path in phase " + pv.phase);
                        throw AnalysisError("indeterminate node voltages in phase " + pv.phase);
                    }
                }
            }
        }
        Eigen::VectorXd resid = a * x - rhs;
        double qscale = std::max(rhs.cwiseAbs().maxCoeff(), scale * (x.size() ? x.cwiseAbs().maxCoeff() : 0.0));
        if (resid.size() && resid.cwiseAbs().maxCoeff() > 1e-9 * qscale + 1e-300) {
            std::string who = c.otas.empty() ? std::string() : " (OTA " + c.otas.front().name + ")";
            throw AnalysisError("inconsistent charge constraints in phase " + pv.phase + who);
        }
        for (std::size_t u = 0; u < unknown.size(); ++u) v(unknown[u]) = x(static_cast<Eigen::Index>(u));
    }

    Settled out;
    for (const auto& cap : c.capacitors) {
        auto h = held.find(cap.name);
        out.charges[cap.name] = h != held.end() ? h->second : cap.value * (v(sn(cap.a)) - v(sn(cap.b)));
    }
    for (std::size_t i = 0; i < c.nodes.size(); ++i) out.voltages[c.nodes[i]] = v(lab[i]);
    return out;
}

inline ChargeState redistribute(const PhaseView& pv, const ChargeState& q0) { return settle(pv, q0).charges; }

inline ChargeState zero_charges(const Circuit& c) {
    ChargeState q;
    for (const auto& cap : c.capacitors) q[cap.name] = 0.0;
    return q;
}

}  // namespace scnoise
