#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scnoise/errors.hpp"
#include "scnoise/union_find.hpp"

namespace scnoise {

inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kDefaultGon = 1e-3;
inline constexpr double kDefaultTemperature = 300.0;

struct Port {
    std::string a;
    std::string b;
    bool operator==(const Port&) const = default;
};

struct Capacitor {
    std::string name;
    std::string a;
    std::string b;
    double value = 0.0;
    bool operator==(const Capacitor&) const = default;
};

struct Switch {
    std::string name;
    std::string a;
    std::string b;
    std::vector<std::string> closed_in;
    double gon = kDefaultGon;

    bool closed(std::string_view phase) const {
        return std::find(closed_in.begin(), closed_in.end(), phase) != closed_in.end();
    }
    bool operator==(const Switch&) const = default;
};

struct Ota {
    std::string name;
    std::string input;
    std::string output;
    double gm = 0.0;
    double gamma = 0.0;
    bool operator==(const Ota&) const = default;
};

struct Source {
    std::string name;
    std::string node;
    double dc = 0.0;
    bool operator==(const Source&) const = default;
};

struct Readout {
    std::string phase;
    Port port;
    bool operator==(const Readout&) const = default;
};

struct InjectDirective {
    std::string phase;
    Port port;
    std::string cap;
    bool operator==(const InjectDirective&) const = default;
};

struct Circuit {
    std::string name = "unnamed";
    double temperature = kDefaultTemperature;
    double fs = 0.0;  // 0 when not given
    std::vector<std::string> phases;
    std::string ground;
    std::vector<std::string> nodes;  // ground first, rest sorted
    std::vector<Capacitor> capacitors;
    std::vector<Switch> switches;
    std::vector<Ota> otas;
    std::vector<Source> sources;
    std::optional<Readout> readout;
    std::optional<std::string> memory;
    std::vector<InjectDirective> injections;

    bool operator==(const Circuit&) const = default;

    int node_index(std::string_view n) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == n) return static_cast<int>(i);
        return -1;
    }
    bool has_node(std::string_view n) const { return node_index(n) >= 0; }

    int phase_index(std::string_view p) const {
        for (std::size_t i = 0; i < phases.size(); ++i)
            if (phases[i] == p) return static_cast<int>(i);
        return -1;
    }

    const Capacitor* find_capacitor(std::string_view n) const {
        for (const auto& c : capacitors)
            if (c.name == n) return &c;
        return nullptr;
    }

    // ground and ideal-source nodes sit at 0 V for noise purposes
    bool is_fixed(std::string_view n) const {
        if (n == ground) return true;
        for (const auto& s : sources)
            if (s.node == n) return true;
        return false;
    }
};

struct PhaseView {
    const Circuit* circuit = nullptr;
    std::string phase;
    std::vector<std::size_t> closed;  // indices into circuit->switches
    std::vector<std::size_t> open;
};

// ============================================================================
// Lexing helpers
// ============================================================================

namespace detail {

struct Token {
    std::string text;
    int column = 1;
};

inline std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        char ch = line[i];
        if (ch == '#') break;
        if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\v' || ch == '\f') {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && line[i] != '#' && !std::isspace(static_cast<unsigned char>(line[i])))
            ++i;
        out.push_back({std::string(line.substr(start, i - start)), static_cast<int>(start) + 1});
    }
    return out;
}

inline bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    for (char ch : s) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (!(std::isalnum(u) || ch == '_' || ch == '.' || ch == '-')) return false;
    }
    return true;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

// Number with optional SI suffix (f p n u m k meg), case-insensitive.
inline std::optional<double> parse_number(std::string_view s, std::string* why = nullptr) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) {
        if (why) *why = "malformed number '" + std::string(s) + "'";
        return std::nullopt;
    }
    std::string suffix = lower(std::string_view(ptr, static_cast<std::size_t>(last - ptr)));
    // divide for the small prefixes so 20f lands on the nearest double to 2e-14
    if (suffix.empty()) {
    } else if (suffix == "meg") v *= 1e6;
    else if (suffix == "k") v *= 1e3;
    else if (suffix == "m") v /= 1e3;
    else if (suffix == "u") v /= 1e6;
    else if (suffix == "n") v /= 1e9;
    else if (suffix == "p") v /= 1e12;
    else if (suffix == "f") v /= 1e15;
    else {
        if (why) *why = "unknown unit suffix '" + suffix + "' in '" + std::string(s) + "'";
        return std::nullopt;
    }
    if (!std::isfinite(v)) {
        if (why) *why = "non-finite number '" + std::string(s) + "'";
        return std::nullopt;
    }
    return v;
}

inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

struct KeyValue {
    std::string key;
    std::string value;
    int value_column = 1;
};

inline std::optional<KeyValue> split_kv(const Token& t) {
    auto eq = t.text.find('=');
    if (eq == std::string::npos || eq == 0) return std::nullopt;
    return KeyValue{lower(t.text.substr(0, eq)), t.text.substr(eq + 1),
                    t.column + static_cast<int>(eq) + 1};
}

inline std::vector<std::pair<std::string, int>> split_list(const std::string& s, int column) {
    std::vector<std::pair<std::string, int>> out;
    std::size_t start = 0;
    while (true) {
        auto comma = s.find(',', start);
        std::string part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        out.emplace_back(part, column + static_cast<int>(start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Circuit run() {
        std::size_t pos = 0;
        int line_no = 0;
        while (pos <= text_.size()) {
            auto nl = text_.find('\n', pos);
            std::string_view line = text_.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++line_no;
            line_ = line_no;
            auto toks = tokenize(line);
            if (!toks.empty()) last_line_ = line_no;
            statement(std::move(toks));
            if (nl == std::string_view::npos) break;
            pos = nl + 1;
        }
        finish();
        return std::move(c_);
    }

private:
    enum class RefKind { Phase, Node, Cap };
    struct Ref {
        RefKind kind;
        std::string name;
        int line;
        int column;
    };

    [[noreturn]] void fail(int column, const std::string& msg) const { throw ParseError(line_, column, msg); }

    double value(const Token& t) const {
        std::string why;
        auto v = parse_number(t.text, &why);
        if (!v) fail(t.column, why);
        return *v;
    }
    double value(const std::string& s, int column) const { return value(Token{s, column}); }

    double positive(const Token& t, const std::string& what) const {
        double v = value(t);
        if (!(v > 0.0)) fail(t.column, "nonpositive " + what + " '" + t.text + "'");
        return v;
    }

    std::string ident(const Token& t, const std::string& what) const {
        if (!is_identifier(t.text)) fail(t.column, "invalid " + what + " '" + t.text + "'");
        return t.text;
    }

    void arity(const std::vector<Token>& tk, std::size_t lo, std::size_t hi, const char* usage) const {
        if (tk.size() < lo || tk.size() > hi) {
            int col = tk.size() > hi ? tk[hi].column : tk.front().column;
            fail(col, std::string("expected: ") + usage);
        }
    }

    void declare_element(const Token& t) {
        auto it = names_.find(t.text);
        if (it != names_.end())
            fail(t.column, "duplicate element name '" + t.text + "' (first defined on line " +
                               std::to_string(it->second) + ")");
        names_[t.text] = line_;
    }

    std::string node(const Token& t) {
        std::string n = ident(t, "node name");
        declared_nodes_.insert(n);
        return n;
    }

    void once(const std::string& kw, const Token& t) {
        if (!seen_.insert(kw).second) fail(t.column, "duplicate '" + kw + "' statement");
    }

    void statement(const std::vector<Token>& tk) {
        if (tk.empty()) return;
        const std::string kw = lower(tk[0].text);
        if (kw == "circuit") {
            arity(tk, 2, 2, "circuit <name>");
            once(kw, tk[0]);
            c_.name = ident(tk[1], "circuit name");
        } else if (kw == "temp") {
            arity(tk, 2, 2, "temp <kelvin>");
            once(kw, tk[0]);
            c_.temperature = positive(tk[1], "temperature");
        } else if (kw == "fs") {
            arity(tk, 2, 2, "fs <hertz>");
            once(kw, tk[0]);
            c_.fs = positive(tk[1], "sampling frequency");
        } else if (kw == "phases") {
            if (tk.size() < 2) fail(tk[0].column, "expected: phases <id> <id> ...");
            once(kw, tk[0]);
            for (std::size_t i = 1; i < tk.size(); ++i) {
                std::string p = ident(tk[i], "phase id");
                if (c_.phase_index(p) >= 0) fail(tk[i].column, "duplicate phase id '" + p + "'");
                c_.phases.push_back(p);
            }
        } else if (kw == "ground") {
            arity(tk, 2, 2, "ground <node>");
            if (!c_.ground.empty()) fail(tk[0].column, "duplicate 'ground' statement (exactly one ground node)");
            c_.ground = node(tk[1]);
        } else if (kw == "cap") {
            arity(tk, 5, 5, "cap <name> <a> <b> <farads>");
            Capacitor cap;
            cap.name = ident(tk[1], "element name");
            declare_element(tk[1]);
            cap.a = node(tk[2]);
            cap.b = node(tk[3]);
            if (cap.a == cap.b) fail(tk[3].column, "capacitor terminals identical");
            cap.value = positive(tk[4], "capacitance");
            c_.capacitors.push_back(cap);
        } else if (kw == "switch") {
            arity(tk, 5, 6, "switch <name> <a> <b> phase=<id>[,<id>] [gon=<siemens>]");
            Switch sw;
            sw.name = ident(tk[1], "element name");
            declare_element(tk[1]);
            sw.a = node(tk[2]);
            sw.b = node(tk[3]);
            if (sw.a == sw.b) fail(tk[3].column, "switch terminals identical");
            bool have_phase = false, have_gon = false;
            for (std::size_t i = 4; i < tk.size(); ++i) {
                auto kv = split_kv(tk[i]);
                if (!kv) fail(tk[i].column, "expected key=value, got '" + tk[i].text + "'");
                if (kv->key == "phase" && !have_phase) {
                    have_phase = true;
                    for (auto& [p, col] : split_list(kv->value, kv->value_column)) {
                        if (!is_identifier(p)) fail(col, "invalid phase id '" + p + "'");
                        if (sw.closed(p)) fail(col, "phase '" + p + "' listed twice");
                        sw.closed_in.push_back(p);
                        refs_.push_back({RefKind::Phase, p, line_, col});
                    }
                } else if (kv->key == "gon" && !have_gon) {
                    have_gon = true;
                    Token v{kv->value, kv->value_column};
                    sw.gon = positive(v, "switch on-conductance");
                } else {
                    fail(tk[i].column, "unexpected switch attribute '" + tk[i].text + "'");
                }
            }
            if (!have_phase) fail(tk[4].column, "switch needs phase=<id>[,<id>]");
            c_.switches.push_back(sw);
        } else if (kw == "ota") {
            arity(tk, 6, 6, "ota <name> in=<node> out=<node> gm=<siemens> gamma=<x>");
            Ota o;
            o.name = ident(tk[1], "element name");
            declare_element(tk[1]);
            std::set<std::string> got;
            for (std::size_t i = 2; i < tk.size(); ++i) {
                auto kv = split_kv(tk[i]);
                if (!kv) fail(tk[i].column, "expected key=value, got '" + tk[i].text + "'");
                if (!got.insert(kv->key).second) fail(tk[i].column, "duplicate attribute '" + kv->key + "'");
                Token v{kv->value, kv->value_column};
                if (kv->key == "in") o.input = node(v);
                else if (kv->key == "out") o.output = node(v);
                else if (kv->key == "gm") o.gm = positive(v, "OTA gm");
                else if (kv->key == "gamma") {
                    o.gamma = value(v);
                    if (o.gamma < 0.0) fail(v.column, "negative OTA gamma '" + v.text + "'");
                } else fail(tk[i].column, "unexpected OTA attribute '" + tk[i].text + "'");
            }
            if (o.input == o.output) fail(tk[1].column, "OTA input and output identical");
            ota_cols_.push_back(tk[1].column);
            ota_lines_.push_back(line_);
            c_.otas.push_back(o);
        } else if (kw == "vsrc") {
            arity(tk, 4, 4, "vsrc <name> <node> <volts>");
            Source s;
            s.name = ident(tk[1], "element name");
            declare_element(tk[1]);
            s.node = node(tk[2]);
            s.dc = value(tk[3]);
            for (const auto& other : c_.sources)
                if (other.node == s.node) fail(tk[2].column, "node '" + s.node + "' already driven by " + other.name);
            src_cols_.push_back(tk[2].column);
            src_lines_.push_back(line_);
            c_.sources.push_back(s);
        } else if (kw == "readout") {
            arity(tk, 4, 4, "readout <nodeA> <nodeB> phase=<id>");
            if (c_.readout) fail(tk[0].column, "duplicate 'readout' statement");
            Readout r;
            r.port.a = ident(tk[1], "node name");
            r.port.b = ident(tk[2], "node name");
            if (r.port.a == r.port.b) fail(tk[2].column, "readout nodes identical");
            refs_.push_back({RefKind::Node, r.port.a, line_, tk[1].column});
            refs_.push_back({RefKind::Node, r.port.b, line_, tk[2].column});
            auto kv = split_kv(tk[3]);
            if (!kv || kv->key != "phase") fail(tk[3].column, "expected phase=<id>");
            r.phase = kv->value;
            if (!is_identifier(r.phase)) fail(kv->value_column, "invalid phase id '" + r.phase + "'");
            refs_.push_back({RefKind::Phase, r.phase, line_, kv->value_column});
            c_.readout = r;
        } else if (kw == "memory") {
            arity(tk, 2, 2, "memory <capname>");
            once(kw, tk[0]);
            c_.memory = ident(tk[1], "capacitor name");
            refs_.push_back({RefKind::Cap, *c_.memory, line_, tk[1].column});
        } else if (kw == "inject") {
            arity(tk, 4, 4, "inject phase=<id> port=<nodeA>,<nodeB> cap=<capname>");
            InjectDirective d;
            std::set<std::string> got;
            for (std::size_t i = 1; i < tk.size(); ++i) {
                auto kv = split_kv(tk[i]);
                if (!kv) fail(tk[i].column, "expected key=value, got '" + tk[i].text + "'");
                if (!got.insert(kv->key).second) fail(tk[i].column, "duplicate attribute '" + kv->key + "'");
                if (kv->key == "phase") {
                    if (!is_identifier(kv->value)) fail(kv->value_column, "invalid phase id '" + kv->value + "'");
                    d.phase = kv->value;
                    refs_.push_back({RefKind::Phase, d.phase, line_, kv->value_column});
                } else if (kv->key == "port") {
                    auto parts = split_list(kv->value, kv->value_column);
                    if (parts.size() != 2) fail(kv->value_column, "port needs exactly two nodes");
                    for (auto& [n, col] : parts) {
                        if (!is_identifier(n)) fail(col, "invalid node name '" + n + "'");
                        refs_.push_back({RefKind::Node, n, line_, col});
                    }
                    if (parts[0].first == parts[1].first) fail(parts[1].second, "port nodes identical");
                    d.port = {parts[0].first, parts[1].first};
                } else if (kv->key == "cap") {
                    if (!is_identifier(kv->value)) fail(kv->value_column, "invalid capacitor name '" + kv->value + "'");
                    d.cap = kv->value;
                    refs_.push_back({RefKind::Cap, d.cap, line_, kv->value_column});
                } else fail(tk[i].column, "unexpected inject attribute '" + tk[i].text + "'");
            }
            c_.injections.push_back(d);
        } else {
            fail(tk[0].column, "unknown statement '" + tk[0].text + "'");
        }
    }

    void finish() {
        if (c_.ground.empty()) throw ParseError(std::max(last_line_, 1), 1, "missing 'ground' statement");
        if (c_.phases.empty()) throw ParseError(std::max(last_line_, 1), 1, "missing 'phases' statement");
        for (const auto& r : refs_) {
            bool ok = false;
            const char* what = "";
            switch (r.kind) {
                case RefKind::Phase: ok = c_.phase_index(r.name) >= 0; what = "unknown phase id"; break;
                case RefKind::Node: ok = declared_nodes_.count(r.name) > 0; what = "undeclared node"; break;
                case RefKind::Cap: ok = c_.find_capacitor(r.name) != nullptr; what = "unknown capacitor"; break;
            }
            if (!ok) throw ParseError(r.line, r.column, std::string(what) + " '" + r.name + "'");
        }
        for (std::size_t i = 0; i < c_.sources.size(); ++i)
            if (c_.sources[i].node == c_.ground)
                throw ParseError(src_lines_[i], src_cols_[i], "source " + c_.sources[i].name + " placed on ground");
        for (std::size_t i = 0; i < c_.otas.size(); ++i) {
            const auto& o = c_.otas[i];
            if (c_.is_fixed(o.input) || c_.is_fixed(o.output))
                throw ParseError(ota_lines_[i], ota_cols_[i], "OTA " + o.name + " terminal tied to ground or a source");
        }
        c_.nodes.clear();
        c_.nodes.push_back(c_.ground);
        for (const auto& n : declared_nodes_)
            if (n != c_.ground) c_.nodes.push_back(n);
    }

    std::string_view text_;
    Circuit c_;
    int line_ = 0;
    int last_line_ = 0;
    std::map<std::string, int> names_;
    std::set<std::string> declared_nodes_;
    std::set<std::string> seen_;
    std::vector<Ref> refs_;
    std::vector<int> ota_cols_, ota_lines_, src_cols_, src_lines_;
};

}  // namespace detail

// ============================================================================
// Public API
// ============================================================================

inline Circuit parse(std::string_view text) { return detail::Parser(text).run(); }

inline std::string serialize(const Circuit& c) {
    using detail::format_number;
    std::ostringstream os;
    os << "circuit " << c.name << "\n";
    os << "temp " << format_number(c.temperature) << "\n";
    if (c.fs > 0.0) os << "fs " << format_number(c.fs) << "\n";
    os << "phases";
    for (const auto& p : c.phases) os << " " << p;
    os << "\n";
    os << "ground " << c.ground << "\n";
    for (const auto& s : c.sources) os << "vsrc " << s.name << " " << s.node << " " << format_number(s.dc) << "\n";
    for (const auto& cap : c.capacitors)
        os << "cap " << cap.name << " " << cap.a << " " << cap.b << " " << format_number(cap.value) << "\n";
    for (const auto& sw : c.switches) {
        os << "switch " << sw.name << " " << sw.a << " " << sw.b << " phase=";
        for (std::size_t i = 0; i < sw.closed_in.size(); ++i) os << (i ? "," : "") << sw.closed_in[i];
        os << " gon=" << format_number(sw.gon) << "\n";
    }
    for (const auto& o : c.otas)
        os << "ota " << o.name << " in=" << o.input << " out=" << o.output << " gm=" << format_number(o.gm)
           << " gamma=" << format_number(o.gamma) << "\n";
    if (c.readout) os << "readout " << c.readout->port.a << " " << c.readout->port.b << " phase=" << c.readout->phase << "\n";
    if (c.memory) os << "memory " << *c.memory << "\n";
    for (const auto& d : c.injections)
        os << "inject phase=" << d.phase << " port=" << d.port.a << "," << d.port.b << " cap=" << d.cap << "\n";
    return os.str();
}

inline PhaseView phase_view(const Circuit& c, std::string_view phase) {
    if (c.phase_index(phase) < 0) throw Error("unknown phase id '" + std::string(phase) + "'");
    PhaseView pv;
    pv.circuit = &c;
    pv.phase = std::string(phase);
    for (std::size_t i = 0; i < c.switches.size(); ++i)
        (c.switches[i].closed(phase) ? pv.closed : pv.open).push_back(i);
    return pv;
}

// Node -> supernode label for a phase: closed switches merged, sources merged
// into ground. Ground (node 0) always gets label 0.
inline std::vector<int> phase_supernodes(const PhaseView& pv, int* count = nullptr) {
    const Circuit& c = *pv.circuit;
    detail::UnionFind uf(c.nodes.size());
    for (const auto& s : c.sources) uf.unite(0, static_cast<std::size_t>(c.node_index(s.node)));
    for (auto i : pv.closed) {
        const auto& sw = c.switches[i];
        uf.unite(static_cast<std::size_t>(c.node_index(sw.a)), static_cast<std::size_t>(c.node_index(sw.b)));
    }
    return uf.labels(count);
}

// Explicit `memory` wins; otherwise the unique capacitor that spans the input
// and output supernodes of the same OTA in every phase.
inline std::optional<std::string> memory_capacitor(const Circuit& c) {
    if (c.memory) return c.memory;
    std::vector<std::string> found;
    for (const auto& cap : c.capacitors) {
        for (const auto& o : c.otas) {
            bool every = !c.phases.empty();
            for (const auto& p : c.phases) {
                auto pv = phase_view(c, p);
                auto lab = phase_supernodes(pv);
                int a = lab[c.node_index(cap.a)], b = lab[c.node_index(cap.b)];
                int in = lab[c.node_index(o.input)], out = lab[c.node_index(o.output)];
                if (!((a == in && b == out) || (a == out && b == in)) || in == out) {
                    every = false;
                    break;
                }
            }
            if (every) {
                found.push_back(cap.name);
                break;
            }
        }
    }
    if (found.size() == 1) return found.front();
    return std::nullopt;
}

}  // namespace scnoise
