#include "tse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

namespace tse {

namespace {

double quantize(double v, double scale) { return std::round(v * scale) / scale; }

// Per-counter daily demand curve: two rush-hour peaks over a mildly
// oscillating base. Peak positions, magnitudes and phases vary by counter
// (sites see different traffic mixes), which is what makes the slot index
// recoverable from a handful of counters.
struct CounterCurve {
    double amp = 0;
    double base = 0, m_mag = 0, m_mu = 0, m_sig = 1;
    double e_mag = 0, e_nu = 0, e_tau = 1;
    double psi = 0, chi = 0;

    static CounterCurve draw(double amplitude, Rng& rng) {
        CounterCurve c;
        c.amp = amplitude * rng.uniform(0.7, 1.4);
        c.base = rng.uniform(0.5, 0.9);
        c.m_mag = rng.uniform(0.7, 1.4);
        c.m_mu = rng.uniform(26.0, 42.0);
        c.m_sig = rng.uniform(7.0, 12.0);
        c.e_mag = rng.uniform(0.9, 1.8);
        c.e_nu = rng.uniform(60.0, 80.0);
        c.e_tau = rng.uniform(9.0, 14.0);
        c.psi = rng.uniform(0.0, 2.0 * M_PI);
        c.chi = rng.uniform(0.0, 2.0 * M_PI);
        return c;
    }

    double profile(int slot) const {
        double s = static_cast<double>(slot);
        double v = base + m_mag * std::exp(-std::pow((s - m_mu) / m_sig, 2)) +
                   e_mag * std::exp(-std::pow((s - e_nu) / e_tau, 2)) +
                   0.35 * std::sin(2.0 * M_PI * s / kSlotsPerDay + psi) +
                   0.18 * std::sin(6.0 * M_PI * s / kSlotsPerDay + chi);
        return std::max(v, 0.05);
    }
};

// rush-hour congestion propensity
double congestion_profile(int slot) {
    double s = static_cast<double>(slot);
    double u = 0.10 + 0.65 * std::exp(-std::pow((s - 34.0) / 6.0, 2)) +
               0.75 * std::exp(-std::pow((s - 70.0) / 8.0, 2));
    return std::min(u, 0.9);
}

// weekends drop sharply; weekdays differ only softly
const double kWeekdayFactor[7] = {1.00, 1.01, 1.03, 1.02, 1.05, 0.80, 0.72};

}  // namespace

void SyntheticSpec::validate() const {
    auto bad = [](const std::string& m) { fail("config", "synthetic spec: " + m); };
    if (nodes < 4) bad("need at least 4 nodes");
    if (extra_edges < 0) bad("extra_edges must be >= 0");
    if (counter_every < 1) bad("counter_every must be >= 1");
    if (supersegments < 1) bad("need at least one supersegment");
    if (train_days < 8) bad("need at least 8 training days");
    if (test_days < 1) bad("need at least one test day");
    if (snapshots_per_day < 1 || snapshots_per_day > kSlotsPerDay - 4)
        bad("snapshots_per_day out of range");
    if (volume_amplitude <= 0) bad("volume_amplitude must be > 0");
    if (volume_noise < 0 || eta_noise < 0) bad("noise must be >= 0");
    if (missing_rate < 0 || missing_rate >= 1) bad("missing_rate out of [0,1)");
    if (label_coverage <= 0 || label_coverage > 1) bad("label_coverage out of (0,1]");
    if (eta_base <= 0) bad("eta_base must be > 0");
}

Dataset synthesize(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    Dataset data;
    data.city = spec.city;
    RoadGraph& g = data.graph;

    // ---- graph: ring backbone plus random chords ----
    for (int i = 0; i < spec.nodes; ++i)
        g.nodes.push_back({i + 1, i % spec.counter_every == 0});

    EdgeId next_edge = 1;
    std::set<std::pair<NodeId, NodeId>> pairs;
    auto add_edge = [&](NodeId a, NodeId b) {
        if (a == b || !pairs.insert({a, b}).second) return false;
        Edge e;
        e.id = next_edge++;
        e.source = a;
        e.sink = b;
        e.attr.oneway = rng.uniform() < 0.3;
        e.attr.tunnel = rng.uniform() < 0.05;
        e.attr.highway_class = rng.uniform_int(1, 6);
        static const double speeds[5] = {30, 50, 60, 80, 100};
        e.attr.speed_kph = speeds[rng.uniform_int(0, 4)];
        e.attr.maxspeed = e.attr.speed_kph + 10.0 * rng.uniform_int(0, 2);
        e.attr.lanes = rng.uniform_int(1, 3);
        e.attr.length_m = quantize(rng.uniform(50.0, 500.0), 10.0);
        e.attr.highway_importance = quantize(rng.uniform(0.0, 1.0), 10000.0);
        g.edges.push_back(std::move(e));
        return true;
    };
    for (int i = 0; i < spec.nodes; ++i)
        add_edge(i + 1, (i + 1) % spec.nodes + 1);
    int chords = 0;
    while (chords < spec.extra_edges) {
        NodeId a = rng.uniform_int(1, spec.nodes);
        NodeId b = rng.uniform_int(1, spec.nodes);
        if (add_edge(a, b)) ++chords;
    }

    // hop distance from each node to the nearest counter (undirected BFS)
    std::map<NodeId, std::vector<NodeId>> adj;
    for (const auto& e : g.edges) {
        adj[e.source].push_back(e.sink);
        adj[e.sink].push_back(e.source);
    }
    std::map<NodeId, int> hop;
    std::deque<NodeId> frontier;
    for (const auto& n : g.nodes)
        if (n.is_counter) {
            hop[n.id] = 0;
            frontier.push_back(n.id);
        }
    while (!frontier.empty()) {
        NodeId cur = frontier.front();
        frontier.pop_front();
        for (NodeId nb : adj[cur])
            if (!hop.count(nb)) {
                hop[nb] = hop[cur] + 1;
                frontier.push_back(nb);
            }
    }
    for (auto& e : g.edges) {
        auto it = hop.find(e.source);
        if (it != hop.end()) e.attr.counter_distance_hops = it->second;
    }

    // ---- supersegments: short random walks over existing edges ----
    std::map<NodeId, std::vector<NodeId>> out_adj;
    for (const auto& e : g.edges) out_adj[e.source].push_back(e.sink);
    for (auto& [_, v] : out_adj) std::sort(v.begin(), v.end());
    for (int s = 0; s < spec.supersegments; ++s) {
        SuperSegment seg;
        seg.id = 1000 + s;
        NodeId cur = rng.uniform_int(1, spec.nodes);
        seg.node_path.push_back(cur);
        int steps = rng.uniform_int(2, 5);
        for (int k = 0; k < steps; ++k) {
            const auto& nexts = out_adj[cur];
            if (nexts.empty()) break;
            cur = nexts[rng.uniform_int(0, static_cast<int>(nexts.size()) - 1)];
            seg.node_path.push_back(cur);
        }
        if (seg.node_path.size() < 2) {  // dead-end start; fall back to a ring step
            seg.node_path = {1, 2};
        }
        g.supersegments.push_back(std::move(seg));
    }

    // ---- per-entity latent parameters ----
    std::map<NodeId, CounterCurve> curves;
    for (const auto& n : g.nodes)
        if (n.is_counter) curves[n.id] = CounterCurve::draw(spec.volume_amplitude, rng);
    std::map<EdgeId, double> edge_risk;
    for (const auto& e : g.edges) edge_risk[e.id] = rng.uniform(0.35, 1.0);
    std::map<SegmentId, double> seg_base;
    for (const auto& s : g.supersegments)
        seg_base[s.id] = spec.eta_base *
                         (0.6 + 0.25 * (static_cast<double>(s.node_path.size()) - 1)) *
                         rng.uniform(0.8, 1.25);

    const int start_month = spec.start_date.month;
    auto month_factor = [&](const Date& d) {
        int diff = (d.month - start_month + 12) % 12;
        return 1.0 + 0.02 * diff;
    };
    auto weekday_factor = [&](int dow) {
        return spec.weekday_signal ? kWeekdayFactor[dow] : 1.0;
    };

    auto volume_at = [&](NodeId node, const Date& d, int slot) {
        const CounterCurve& c = curves.at(node);
        double v = c.amp * c.profile(slot) * weekday_factor(d.day_of_week()) *
                       month_factor(d) +
                   spec.volume_noise * c.amp * rng.normal();
        return quantize(std::max(v, 0.0), 100.0);
    };

    // ---- instances ----
    auto make_day = [&](const Date& d, std::vector<Instance>& out) {
        // sample distinct slots in [4, 95] so all four lags stay inside the day
        std::vector<int> slots;
        for (int s = 4; s < kSlotsPerDay; ++s) slots.push_back(s);
        rng.shuffle(slots);
        slots.resize(spec.snapshots_per_day);
        std::sort(slots.begin(), slots.end());

        int dow = d.day_of_week();
        bool weekend = weekend_flag(dow);
        for (int slot : slots) {
            Instance inst;
            inst.date = d;
            inst.slot = slot;
            inst.snapshot.city = spec.city;
            inst.snapshot.true_context = TimeContext::from(d, slot);
            for (const auto& [node, curve] : curves) {
                (void)curve;
                std::array<double, kLags> lags;
                for (int k = 0; k < kLags; ++k) {
                    double v = volume_at(node, d, slot - 1 - k);
                    lags[k] = rng.uniform() < spec.missing_rate ? missing_value() : v;
                }
                inst.snapshot.volumes[node] = lags;
            }
            for (const auto& e : g.edges) {
                if (rng.uniform() >= spec.label_coverage) continue;
                double u = edge_risk[e.id] * congestion_profile(slot) *
                           (weekend ? 0.3 : 1.0);
                double p_red = 0.70 * u;
                double p_yellow = 0.05 + 0.30 * u;
                double x = rng.uniform();
                int cls = x < p_red ? kRed : (x < p_red + p_yellow ? kYellow : kGreen);
                inst.core_labels.push_back({e.id, cls});
            }
            for (const auto& s : g.supersegments) {
                if (rng.uniform() >= spec.label_coverage) continue;
                double base = seg_base[s.id];
                double wf = spec.weekday_signal && weekend ? 0.8 : 1.0;
                double eta = base *
                                 (1.0 + spec.eta_modulation *
                                            std::sin(2.0 * M_PI * slot / kSlotsPerDay)) *
                                 wf +
                             spec.eta_noise * base * rng.normal();
                inst.eta_labels.push_back({s.id, quantize(std::max(eta, 1.0), 1000.0)});
            }
            out.push_back(std::move(inst));
        }
    };

    for (int day = 0; day < spec.train_days; ++day)
        make_day(spec.start_date.plus_days(day), data.train);
    for (int day = 0; day < spec.test_days; ++day)
        make_day(spec.start_date.plus_days(spec.train_days + day), data.test);

    auto violations = validate_graph(g);
    if (!violations.empty())
        fail("validation", "generator produced an invalid graph: " + violations[0]);
    return data;
}

void synthesize_to_dir(const SyntheticSpec& spec, const std::string& dir) {
    write_dataset(dir, synthesize(spec));
}

}  // namespace tse
