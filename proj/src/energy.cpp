#include "arraysim/energy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "arraysim/text.hpp"

namespace arraysim {

namespace {

struct ActionDef {
    const char* component;
    const char* action;
    int address_delta;
    int data_delta;
};

// Canonical emission order, with the export arguments for each action.
constexpr std::array<ActionDef, 24> kActions{{
    {"mac", "random", 0, 1},
    {"mac", "constant", 0, 0},
    {"mac", "gated", 0, 0},
    {"ifmap_sram", "idle", 0, 0},
    {"ifmap_sram", "read_random", 1, 1},
    {"ifmap_sram", "read_repeat", 0, 0},
    {"ifmap_sram", "write_random", 1, 1},
    {"ifmap_sram", "write_repeat", 0, 1},
    {"filter_sram", "idle", 0, 0},
    {"filter_sram", "read_random", 1, 1},
    {"filter_sram", "read_repeat", 0, 0},
    {"filter_sram", "write_random", 1, 1},
    {"filter_sram", "write_repeat", 0, 1},
    {"ofmap_sram", "idle", 0, 0},
    {"ofmap_sram", "read_random", 1, 1},
    {"ofmap_sram", "read_repeat", 0, 0},
    {"ofmap_sram", "write_random", 1, 1},
    {"ofmap_sram", "write_repeat", 0, 1},
    {"ifmap_spad", "read", 0, 1},
    {"ifmap_spad", "write", 0, 1},
    {"weight_spad", "read", 0, 1},
    {"weight_spad", "write", 0, 1},
    {"psum_spad", "read", 0, 1},
    {"psum_spad", "write", 0, 1},
}};

const ActionDef* find_def(const std::string& component, const std::string& action) {
    for (const auto& d : kActions)
        if (component == d.component && action == d.action) return &d;
    return nullptr;
}

std::string fmt_pj(double v) { return text::fmt_double(v); }

}  // namespace

void ActionCounts::set(const std::string& component, const std::string& action, std::uint64_t count) {
    for (auto& e : entries_)
        if (e.component == component && e.action == action) {
            e.count = count;
            return;
        }
    entries_.push_back({component, action, count});
}

void ActionCounts::add(const std::string& component, const std::string& action, std::uint64_t count) {
    for (auto& e : entries_)
        if (e.component == component && e.action == action) {
            e.count += count;
            return;
        }
    entries_.push_back({component, action, count});
}

std::uint64_t ActionCounts::get(const std::string& component, const std::string& action) const {
    for (const auto& e : entries_)
        if (e.component == component && e.action == action) return e.count;
    return 0;
}

std::vector<std::string> ActionCounts::components() const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (std::find(out.begin(), out.end(), e.component) == out.end()) out.push_back(e.component);
    return out;
}

void ActionCounts::merge(const ActionCounts& other) {
    for (const auto& e : other.entries_) add(e.component, e.action, e.count);
}

MacCounts count_mac_actions(std::uint64_t pes, Cycle cycles, double utilization, bool gating) {
    if (!(utilization >= 0.0 && utilization <= 1.0))
        throw ValidationError("utilization " + text::fmt_double(utilization) + " outside [0, 1]");
    const std::uint64_t slots = pes * cycles;
    MacCounts m;
    m.random = std::min<std::uint64_t>(slots, static_cast<std::uint64_t>(
                                                  std::llround(static_cast<double>(slots) * utilization)));
    (gating ? m.gated : m.constant) = slots - m.random;
    return m;
}

RepeatTracker::RepeatTracker(std::uint64_t row_size_elems, std::uint32_t bank_size_rows)
    : row_size_(row_size_elems), depth_(bank_size_rows) {
    if (row_size_elems == 0) throw ValidationError("row_size_elems must be >= 1");
    if (bank_size_rows == 0) throw ValidationError("bank_size_rows must be >= 1");
    open_.reserve(depth_);
}

bool RepeatTracker::access(Address a) {
    const std::uint64_t row = a / row_size_;
    auto it = std::find(open_.begin(), open_.end(), row);
    const bool hit = it != open_.end();
    if (hit) {
        std::rotate(open_.begin(), it, it + 1);
    } else {
        if (open_.size() == depth_) open_.pop_back();
        open_.insert(open_.begin(), row);
    }
    return hit;
}

SramCounts count_sram_actions(const TraceSource& trace, Operand op, bool is_write, std::uint64_t row_size_elems,
                              std::uint32_t bank_size_rows, Cycle cycles, std::uint64_t arraysize) {
    RepeatTracker tracker(row_size_elems, bank_size_rows);
    SramCounts s;
    std::uint64_t total = 0, repeat = 0;
    std::vector<Address> row(trace.width(op));
    for (Cycle c = 0; c < trace.length(); ++c) {
        trace.fill_row(op, c, row);
        for (Address a : row) {
            if (a == kBubble) continue;
            ++total;
            if (tracker.access(a)) ++repeat;
        }
    }
    const std::uint64_t capacity = cycles * arraysize;
    if (total > capacity)
        throw ValidationError(std::to_string(total) + " accesses exceed cycles*arraysize = " + std::to_string(capacity));
    if (is_write) {
        s.write_repeat = repeat;
        s.write_random = total - repeat;
    } else {
        s.read_repeat = repeat;
        s.read_random = total - repeat;
    }
    s.idle = capacity - total;
    return s;
}

SpadCounts count_spad_actions(Dataflow, std::uint64_t ifmap_sram_reads, std::uint64_t filter_sram_reads,
                              std::uint64_t macs) {
    // The dataflow shows up through the SRAM read counts it produces.
    SpadCounts s;
    s.weight_write = filter_sram_reads;
    s.weight_read = macs;
    s.ifmap_write = ifmap_sram_reads;
    s.ifmap_read = macs;
    s.psum_read = macs;
    s.psum_write = macs;
    return s;
}

namespace {

void put_sram(ActionCounts& out, const std::string& comp, const SramCounts& s) {
    out.set(comp, "idle", s.idle);
    out.set(comp, "read_random", s.read_random);
    out.set(comp, "read_repeat", s.read_repeat);
    out.set(comp, "write_random", s.write_random);
    out.set(comp, "write_repeat", s.write_repeat);
}

}  // namespace

ActionCounts count_actions(const DemandTrace& trace, const ComputeReport& compute, const EnergyOptions& opt) {
    ActionCounts out;
    const Cycle cycles = compute.total_cycles;
    const std::uint64_t pes = std::uint64_t{compute.rows} * compute.cols;
    auto mac = count_mac_actions(pes, cycles, std::clamp(compute.utilization, 0.0, 1.0), opt.clock_gating);
    out.set("mac", "random", mac.random);
    out.set("mac", "constant", mac.constant);
    out.set("mac", "gated", mac.gated);

    const std::array<const char*, 3> names{"ifmap_sram", "filter_sram", "ofmap_sram"};
    for (Operand op : kOperands) {
        auto s = count_sram_actions(trace, op, op == Operand::Ofmap, opt.row_size_elems, opt.bank_size_rows, cycles,
                                    trace.width(op));
        put_sram(out, names[static_cast<int>(op)], s);
    }

    auto sp = count_spad_actions(trace.dims().dataflow, compute.op(Operand::Ifmap).accesses,
                                 compute.op(Operand::Filter).accesses, compute.macs);
    out.set("ifmap_spad", "read", sp.ifmap_read);
    out.set("ifmap_spad", "write", sp.ifmap_write);
    out.set("weight_spad", "read", sp.weight_read);
    out.set("weight_spad", "write", sp.weight_write);
    out.set("psum_spad", "read", sp.psum_read);
    out.set("psum_spad", "write", sp.psum_write);
    return out;
}

void EnergyTable::set(const std::string& component, const std::string& action, double pj) {
    entries_[{component, action}] = pj;
}

void EnergyTable::set_leakage(const std::string& component, double pj_per_cycle) { leakage_[component] = pj_per_cycle; }

double EnergyTable::entry(const std::string& component, const std::string& action) const {
    auto it = entries_.find({component, action});
    if (it == entries_.end())
        throw ConfigError("energy table has no entry for (" + component + ", " + action + ")");
    return it->second;
}

double EnergyTable::leakage(const std::string& component) const {
    auto it = leakage_.find(component);
    return it == leakage_.end() ? 0.0 : it->second;
}

bool EnergyTable::has(const std::string& component, const std::string& action) const {
    return entries_.count({component, action}) != 0;
}

EnergyTable EnergyTable::scaled(double k) const {
    EnergyTable t = *this;
    for (auto& [key, v] : t.entries_) v *= k;
    for (auto& [key, v] : t.leakage_) v *= k;
    return t;
}

void EnergyTable::check_closed() const {
    for (const auto& d : kActions)
        entry(d.component, d.action);
}

EnergyTable parse_energy_table(std::string_view content) {
    EnergyTable t;
    bool first = true;
    for (const auto& rec : text::read_csv(content)) {
        if (!rec.cells.empty() && rec.cells[0].starts_with("#")) continue;
        if (first) {
            first = false;
            if (!rec.cells.empty() && text::lower(rec.cells[0]) == "component") continue;
        }
        if (rec.cells.size() != 3)
            throw ParseError("energy table row needs component,action,energy_pJ", rec.line);
        const std::string comp = text::lower(rec.cells[0]);
        const std::string act = text::lower(rec.cells[1]);
        const double v = text::parse_double(rec.cells[2], rec.line, "energy_pJ");
        if (v < 0) throw ParseError("negative energy value", rec.line);
        if (act == "leakage") {
            t.set_leakage(comp, v);
        } else {
            if (!find_def(comp, act)) throw ParseError("unknown action (" + comp + ", " + act + ")", rec.line);
            t.set(comp, act, v);
        }
    }
    t.check_closed();
    return t;
}

EnergyTable load_energy_table(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("energy table not found: " + path.string());
    return parse_energy_table(read_text_file(path));
}

EnergyTable default_energy_table() {
    // Relative placeholder numbers only.
    EnergyTable t;
    t.set("mac", "random", 1.0);
    t.set("mac", "constant", 0.2);
    t.set("mac", "gated", 0.0);
    for (const char* s : {"ifmap_sram", "filter_sram", "ofmap_sram"}) {
        t.set(s, "idle", 0.0);
        t.set(s, "read_random", 6.0);
        t.set(s, "read_repeat", 2.0);
        t.set(s, "write_random", 7.0);
        t.set(s, "write_repeat", 2.5);
        t.set_leakage(s, 0.5);
    }
    for (const char* s : {"ifmap_spad", "weight_spad", "psum_spad"}) {
        t.set(s, "read", 0.3);
        t.set(s, "write", 0.4);
    }
    t.set_leakage("mac", 0.05);
    return t;
}

EnergyReport compute_energy(const ActionCounts& counts, const EnergyTable& table, Cycle cycles, double clock_mhz) {
    EnergyReport r;
    r.cycles = cycles;
    for (const auto& e : counts.entries()) {
        const double pj = static_cast<double>(e.count) * table.entry(e.component, e.action);
        r.lines.push_back({e.component, e.action, e.count, pj});
        r.component_pj[e.component] += pj;
        r.dynamic_pj += pj;
    }
    for (const auto& [comp, leak] : table.leakages()) {
        const double pj = static_cast<double>(cycles) * leak;
        r.lines.push_back({comp, "leakage", cycles, pj});
        r.component_pj[comp] += pj;
        r.leakage_pj += pj;
    }
    r.total_pj = r.dynamic_pj + r.leakage_pj;
    if (cycles > 0 && clock_mhz > 0) {
        const double us = static_cast<double>(cycles) / clock_mhz;
        r.power_mw = r.total_pj / us / 1000.0;
    }
    r.edp = static_cast<double>(cycles) * (r.total_pj * 1e-9);
    return r;
}

std::string export_action_counts(const ActionCounts& counts) {
    std::ostringstream os;
    os << "action_counts:\n";
    std::vector<std::string> comps;
    for (const auto& d : kActions)
        if (std::find(comps.begin(), comps.end(), d.component) == comps.end())
            comps.push_back(d.component);
    for (const auto& c : counts.components())
        if (std::find(comps.begin(), comps.end(), c) == comps.end()) comps.push_back(c);
    for (const auto& comp : comps) {
        os << "  - name: " << comp << "\n    action_counts:\n";
        std::vector<std::string> acts;
        for (const auto& d : kActions)
            if (comp == d.component) acts.push_back(d.action);
        for (const auto& e : counts.entries())
            if (e.component == comp && std::find(acts.begin(), acts.end(), e.action) == acts.end())
                acts.push_back(e.action);
        for (const auto& act : acts) {
            const auto* d = find_def(comp, act);
            os << "      - name: " << act << "\n";
            os << "        arguments:\n";
            os << "          address_delta: " << (d ? d->address_delta : 0) << "\n";
            os << "          data_delta: " << (d ? d->data_delta : 0) << "\n";
            os << "        counts: " << counts.get(comp, act) << "\n";
        }
    }
    return os.str();
}

std::string energy_report_header() { return "Layer,Component,Action,Count,Energy_pJ\n"; }

std::string energy_report_lines(const std::string& layer, const EnergyReport& r) {
    std::string out;
    for (const auto& l : r.lines)
        out += text::csv_line({layer, l.component, l.action, std::to_string(l.count), fmt_pj(l.energy_pj)});
    out += text::csv_line({layer, "TOTAL", "", "", fmt_pj(r.total_pj)});
    return out;
}

}  // namespace arraysim
