#include "arraysim/layout.hpp"

#include <algorithm>
#include <limits>

#include "arraysim/text.hpp"

namespace arraysim {

namespace {

std::uint64_t dim_of(char d, std::uint64_t c, std::uint64_t h, std::uint64_t w) {
    return d == 'c' ? c : d == 'h' ? h : w;
}

}  // namespace

void validate(const LayoutSpec& s) {
    if (s.C < 1 || s.H < 1 || s.W < 1) throw ValidationError("layout dims must be >= 1");
    if (s.c1 < 1 || s.c1 > s.C || s.h1 < 1 || s.h1 > s.H || s.w1 < 1 || s.w1 > s.W)
        throw ValidationError("layout steps must satisfy 1 <= step <= dim");
    if (s.bandwidth_per_bank < 1 || s.num_banks < 1 || s.ports_per_bank < 1)
        throw ValidationError("layout bandwidth, banks and ports must be >= 1");
    if (s.c1 * s.h1 * s.w1 > s.line_width())
        throw ValidationError("layout line of " + std::to_string(s.c1 * s.h1 * s.w1) +
                              " elements exceeds the bank line width " + std::to_string(s.line_width()));
    for (const auto* o : {&s.inter_order, &s.intra_order}) {
        std::string sorted = *o;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != "chw") throw ValidationError("layout order must be a permutation of chw");
    }
}

Placement locate(std::uint64_t c, std::uint64_t h, std::uint64_t w, const LayoutSpec& s) {
    if (c >= s.C || h >= s.H || w >= s.W)
        throw ValidationError("element (" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) +
                              ") outside the tensor");
    Placement p;
    // Line index: tile coordinates in inter_order, tile grid extents rounded up.
    for (char d : s.inter_order) {
        std::uint64_t extent = ceil_div(dim_of(d, s.C, s.H, s.W), dim_of(d, s.c1, s.h1, s.w1));
        p.line_id = p.line_id * extent + dim_of(d, c, h, w) / dim_of(d, s.c1, s.h1, s.w1);
    }
    for (char d : s.intra_order) {
        std::uint64_t step = dim_of(d, s.c1, s.h1, s.w1);
        p.col_id = p.col_id * step + dim_of(d, c, h, w) % step;
    }
    p.bank_id = p.col_id / s.bandwidth_per_bank;
    return p;
}

namespace {

// Distinct (bank, line) pairs per bank; `pairs` is scratch space.
std::uint64_t worst_bank(std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs, std::uint32_t ports) {
    if (pairs.empty()) return 0;
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    std::uint64_t worst = 0;
    for (std::size_t i = 0; i < pairs.size();) {
        std::size_t j = i;
        while (j < pairs.size() && pairs[j].first == pairs[i].first) ++j;
        worst = std::max<std::uint64_t>(worst, ceil_div(j - i, ports));
        i = j;
    }
    return worst;
}

}  // namespace

std::uint64_t cycle_conflicts(const std::vector<ElementCoord>& requests, const LayoutSpec& spec) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    pairs.reserve(requests.size());
    for (const auto& r : requests) {
        auto p = locate(r.c, r.h, r.w, spec);
        pairs.emplace_back(p.bank_id, p.line_id);
    }
    return worst_bank(pairs, spec.ports_per_bank);
}

LayoutSpec make_layout_spec(const LayoutTemplate& t, const LayoutConfig& cfg, std::uint64_t C, std::uint64_t H,
                            std::uint64_t W) {
    LayoutSpec s;
    s.C = C;
    s.H = H;
    s.W = W;
    s.bandwidth_per_bank = cfg.bandwidth_per_bank;
    s.num_banks = cfg.num_banks;
    s.ports_per_bank = cfg.ports_per_bank;
    s.inter_order = t.inter_order;
    s.intra_order = t.intra_order;
    const std::uint64_t width = s.line_width();
    s.c1 = std::clamp<std::uint64_t>(t.c1_step, 1, C);
    s.h1 = std::clamp<std::uint64_t>(t.h1_step, 1, H);
    std::uint64_t w1 = t.w1_step ? t.w1_step : std::max<std::uint64_t>(1, width / (s.c1 * s.h1));
    s.w1 = std::clamp<std::uint64_t>(w1, 1, W);
    validate(s);
    return s;
}

std::array<OperandLayout, 3> operand_layouts(const DemandTrace& trace, const LayoutConfig& cfg) {
    std::array<OperandLayout, 3> out;
    const std::array<const LayoutTemplate*, 3> tmpl{&cfg.ifmap, &cfg.filter, &cfg.ofmap};
    const std::array<Address, 3> bases{trace.bases().ifmap, trace.bases().filter, trace.bases().ofmap};
    for (Operand op : kOperands) {
        auto [rows, cols] = trace.storage_shape(op);
        const int i = static_cast<int>(op);
        out[i].spec = make_layout_spec(*tmpl[i], cfg, 1, rows, cols);
        out[i].base = bases[i];
    }
    return out;
}

namespace {

// Exact n / d for n, d < 2^32 via a precomputed reciprocal.
struct Div32 {
    std::uint64_t d = 1, m = 0;
    explicit Div32(std::uint64_t divisor = 1) : d(divisor), m(~std::uint64_t{0} / divisor + 1) {}
    std::uint64_t operator()(std::uint64_t n) const {
        return d == 1 ? n : static_cast<std::uint64_t>((static_cast<unsigned __int128>(m) * n) >> 64);
    }
};

// locate() with the order strings resolved to per-dimension strides.
struct FastLocator {
    std::array<std::uint64_t, 3> step{}, line_mul{}, col_mul{};
    std::uint64_t H = 1, W = 1, bw = 1, lines = 1;
    std::array<Div32, 3> div_step;
    Div32 div_plane, div_w, div_bw;
    bool small = false;

    explicit FastLocator(const LayoutSpec& s) : H(s.H), W(s.W), bw(s.bandwidth_per_bank) {
        const std::array<std::uint64_t, 3> dims{s.C, s.H, s.W};
        step = {s.c1, s.h1, s.w1};
        auto idx = [](char d) { return d == 'c' ? 0 : d == 'h' ? 1 : 2; };
        std::uint64_t mul = 1;
        for (auto it = s.inter_order.rbegin(); it != s.inter_order.rend(); ++it) {
            const int i = idx(*it);
            line_mul[i] = mul;
            mul *= ceil_div(dims[i], step[i]);
        }
        lines = mul;
        if (s.num_banks > std::numeric_limits<std::uint64_t>::max() / lines)
            throw ValidationError("layout has too many lines to index");
        mul = 1;
        for (auto it = s.intra_order.rbegin(); it != s.intra_order.rend(); ++it) {
            const int i = idx(*it);
            col_mul[i] = mul;
            mul *= step[i];
        }
        constexpr std::uint64_t k32 = std::uint64_t{1} << 32;
        small = s.C <= k32 / (H * W) && s.C * H * W < k32 && s.line_width() < k32;
        if (small) {
            div_step = {Div32(step[0]), Div32(step[1]), Div32(step[2])};
            div_plane = Div32(H * W);
            div_w = Div32(W);
            div_bw = Div32(bw);
        }
    }

    // bank * lines + line, so sorting keys groups lines by bank.
    std::uint64_t key(std::uint64_t off) const {
        const std::uint64_t plane = H * W;
        std::array<std::uint64_t, 3> x{}, q{};
        if (small) {
            x[0] = div_plane(off);
            const std::uint64_t rem = off - x[0] * plane;
            x[1] = div_w(rem);
            x[2] = rem - x[1] * W;
            for (int i = 0; i < 3; ++i) q[i] = div_step[i](x[i]);
        } else {
            x = {off / plane, (off % plane) / W, off % W};
            for (int i = 0; i < 3; ++i) q[i] = x[i] / step[i];
        }
        std::uint64_t line = 0, col = 0;
        for (int i = 0; i < 3; ++i) {
            line += q[i] * line_mul[i];
            col += (x[i] - q[i] * step[i]) * col_mul[i];
        }
        return (small ? div_bw(col) : col / bw) * lines + line;
    }
};

std::uint64_t worst_bank_keys(std::vector<std::uint64_t>& keys, std::uint64_t lines, std::uint32_t ports) {
    if (keys.empty()) return 0;
    std::sort(keys.begin(), keys.end());
    std::uint64_t worst = 0, run = 0, bank_end = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (i > 0 && keys[i] == keys[i - 1]) continue;
        if (keys[i] >= bank_end) {
            worst = std::max(worst, run);
            run = 0;
            bank_end = (keys[i] / lines + 1) * lines;
        }
        ++run;
    }
    worst = std::max(worst, run);
    return ceil_div(worst, ports);
}

}  // namespace

LayoutReport evaluate_layout(const TraceSource& trace, const std::array<OperandLayout, 3>& layouts,
                             Cycle baseline_cycles) {
    for (auto& l : layouts) validate(l.spec);
    const std::array<FastLocator, 3> loc{FastLocator(layouts[0].spec), FastLocator(layouts[1].spec),
                                         FastLocator(layouts[2].spec)};
    LayoutReport rep;
    rep.baseline_cycles = baseline_cycles;
    std::uint32_t max_w = 0;
    for (Operand op : kOperands) max_w = std::max(max_w, trace.width(op));
    std::vector<Address> row(max_w);
    std::vector<std::uint64_t> keys;
    keys.reserve(max_w);
    for (Cycle c = 0; c < trace.length(); ++c) {
        std::uint64_t worst = 0;
        for (Operand op : kOperands) {
            const auto& L = layouts[static_cast<int>(op)];
            const std::uint32_t w = trace.width(op);
            std::span<Address> r(row.data(), w);
            trace.fill_row(op, c, r);
            keys.clear();
            const std::uint64_t plane = L.spec.H * L.spec.W;
            for (Address a : r) {
                if (a == kBubble) continue;
                if (a < L.base || a - L.base >= L.spec.C * plane)
                    throw ValidationError("address " + std::to_string(a) + " outside the " +
                                          std::string(to_string(op)) + " tensor");
                keys.push_back(loc[static_cast<int>(op)].key(a - L.base));
            }
            worst = std::max(worst, worst_bank_keys(keys, loc[static_cast<int>(op)].lines, L.spec.ports_per_bank));
        }
        rep.total_cycles += std::max<std::uint64_t>(1, worst);
    }
    rep.slowdown = baseline_cycles ? static_cast<double>(rep.total_cycles) / static_cast<double>(baseline_cycles) : 0.0;
    return rep;
}

LayoutReport evaluate_layout(const DemandTrace& trace, const LayoutConfig& cfg) {
    return evaluate_layout(trace, operand_layouts(trace, cfg), trace.length());
}

std::string layout_report_header() { return "Layer,Dataflow,Banks,BandwidthPerBank,Slowdown\n"; }

std::string layout_report_line(const std::string& layer, Dataflow df, const LayoutConfig& cfg, const LayoutReport& r) {
    return text::csv_line({layer, std::string(to_string(df)), std::to_string(cfg.num_banks),
                           std::to_string(cfg.bandwidth_per_bank), text::fmt_ratio(r.slowdown)});
}

}  // namespace arraysim
