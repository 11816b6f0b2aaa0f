#include "robnas/cellspace.hpp"

#include "robnas/error.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <sstream>

namespace robnas::cellspace {

namespace {

constexpr std::array<EdgeRule, 3> kDefaultRuleOrder{EdgeRule::zeroize_to_zero, EdgeRule::dead_source_to_zero,
                                                    EdgeRule::skip_passthrough};
constexpr std::string_view kZero = "#";

// Incoming edges per node, in edge-index order.
const std::array<std::vector<std::size_t>, kNumNodes>& incoming_edges() {
    static const auto table = [] {
        std::array<std::vector<std::size_t>, kNumNodes> t;
        for (std::size_t e = 0; e < kNumEdges; ++e) t[kEdges[e].to].push_back(e);
        return t;
    }();
    return table;
}

bool rule_fires(EdgeRule rule, Operator op, const std::string& source, std::string& out) {
    switch (rule) {
        case EdgeRule::zeroize_to_zero:
            if (op != Operator::zeroize) return false;
            out = kZero;
            return true;
        case EdgeRule::dead_source_to_zero:
            if (source != kZero) return false;
            out = kZero;
            return true;
        case EdgeRule::skip_passthrough:
            if (op != Operator::skip_connect) return false;
            out = source;
            return true;
    }
    return false;
}

}  // namespace

std::string_view operator_label(Operator op) {
    switch (op) {
        case Operator::conv3x3: return "conv3x3";
        case Operator::conv1x1: return "conv1x1";
        case Operator::zeroize: return "zeroize";
        case Operator::skip_connect: return "skip_connect";
        case Operator::avg_pool: return "avg_pool";
    }
    return "?";
}

std::string_view operator_interop_name(Operator op) {
    switch (op) {
        case Operator::conv3x3: return "nor_conv_3x3";
        case Operator::conv1x1: return "nor_conv_1x1";
        case Operator::zeroize: return "none";
        case Operator::skip_connect: return "skip_connect";
        case Operator::avg_pool: return "avg_pool_3x3";
    }
    return "?";
}

Genotype Genotype::from_index(std::size_t index) {
    if (index >= kSpaceSize) fail(ErrorKind::validation, "genotype index out of range: " + std::to_string(index));
    std::array<Operator, kNumEdges> ops{};
    for (std::size_t e = kNumEdges; e-- > 0;) {
        ops[e] = static_cast<Operator>(index % kNumOperators);
        index /= kNumOperators;
    }
    return Genotype(ops);
}

std::size_t Genotype::index() const {
    std::size_t idx = 0;
    for (Operator op : ops_) idx = idx * kNumOperators + static_cast<std::size_t>(op);
    return idx;
}

std::size_t Genotype::count(Operator op) const {
    return static_cast<std::size_t>(std::count(ops_.begin(), ops_.end(), op));
}

std::vector<Genotype> enumerate_genotypes() {
    std::vector<Genotype> all;
    all.reserve(kSpaceSize);
    for (std::size_t i = 0; i < kSpaceSize; ++i) all.push_back(Genotype::from_index(i));
    return all;
}

Genotype parse_genotype(std::string_view text) {
    // Expected layout: node groups separated by '+', each "|tok|tok|", node j has j tokens.
    std::array<Operator, kNumEdges> ops{};
    std::size_t pos = 0;
    std::size_t edge = 0;
    auto error_at = [&](std::size_t at, std::string_view token, std::string_view why) {
        std::ostringstream os;
        os << "malformed genotype at position " << at << ": token \"" << token << "\" (" << why << ")";
        fail(ErrorKind::validation, os.str());
    };
    for (int node = 1; node <= 3; ++node) {
        if (node > 1) {
            if (pos >= text.size() || text[pos] != '+') error_at(pos, text.substr(pos, 1), "expected '+'");
            ++pos;
        }
        if (pos >= text.size() || text[pos] != '|') error_at(pos, text.substr(pos, 1), "expected '|'");
        ++pos;
        for (int src = 0; src < node; ++src) {
            std::size_t end = text.find('|', pos);
            if (end == std::string_view::npos) error_at(pos, text.substr(pos), "unterminated token");
            std::string_view token = text.substr(pos, end - pos);
            std::size_t tilde = token.rfind('~');
            if (tilde == std::string_view::npos) error_at(pos, token, "missing '~'");
            std::string_view name = token.substr(0, tilde);
            std::string_view src_text = token.substr(tilde + 1);
            if (src_text != std::to_string(src)) error_at(pos, token, "unexpected source index");
            bool found = false;
            for (Operator op : kOperators) {
                if (operator_interop_name(op) == name) {
                    ops[edge] = op;
                    found = true;
                    break;
                }
            }
            if (!found) error_at(pos, name, "unknown operator");
            ++edge;
            pos = end + 1;
        }
    }
    if (pos != text.size()) error_at(pos, text.substr(pos), "trailing characters");
    // Tokens arrive node-major: (0->1), (0->2, 1->2), (0->3, 1->3, 2->3), which is the edge order.
    return Genotype(ops);
}

std::string format_genotype(const Genotype& g) {
    std::string out;
    std::size_t edge = 0;
    for (int node = 1; node <= 3; ++node) {
        if (node > 1) out += '+';
        out += '|';
        for (int src = 0; src < node; ++src) {
            out += operator_interop_name(g.op(edge++));
            out += '~';
            out += std::to_string(src);
            out += '|';
        }
    }
    return out;
}

std::string to_hex(std::string_view bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out += digits[c >> 4];
        out += digits[c & 0xf];
    }
    return out;
}

std::string CanonicalCell::hex() const { return to_hex(canonical_form); }

CanonicalCell canonicalize_with_order(const Genotype& g, std::span<const EdgeRule, 3> rule_order,
                                      bool reverse_incoming) {
    std::array<std::string, kNumNodes> term;
    term[0] = "0";
    const auto& incoming = incoming_edges();
    for (std::size_t node = 1; node < kNumNodes; ++node) {
        std::vector<std::size_t> edges = incoming[node];
        if (reverse_incoming) std::reverse(edges.begin(), edges.end());
        std::vector<std::string> parts;
        for (std::size_t e : edges) {
            const Operator op = g.op(e);
            const std::string& source = term[kEdges[e].from];
            std::string out;
            bool fired = false;
            for (EdgeRule rule : rule_order) {
                if (rule_fires(rule, op, source, out)) {
                    fired = true;
                    break;
                }
            }
            if (!fired) {
                out = "(" + source + ")@";
                out += operator_label(op);
            }
            parts.push_back(std::move(out));
        }
        std::sort(parts.begin(), parts.end());
        std::string joined;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i) joined += '+';
            joined += parts[i];
        }
        term[node] = std::move(joined);
    }
    return CanonicalCell{term[kNumNodes - 1], 0};
}

CanonicalCell canonicalize(const Genotype& g) {
    CanonicalCell cell = canonicalize_with_order(g, std::span<const EdgeRule, 3>(kDefaultRuleOrder), false);
    const auto& census = space_census();
    cell.class_size = census.class_sizes[census.class_of[g.index()]];
    return cell;
}

const SpaceCensus& space_census() {
    static const SpaceCensus census = [] {
        SpaceCensus c;
        c.class_of.resize(kSpaceSize);
        std::map<std::string, std::uint32_t> ids;
        for (std::size_t i = 0; i < kSpaceSize; ++i) {
            std::string form = canonicalize_with_order(Genotype::from_index(i),
                                                       std::span<const EdgeRule, 3>(kDefaultRuleOrder), false)
                                   .canonical_form;
            auto [it, inserted] = ids.try_emplace(form, static_cast<std::uint32_t>(c.forms.size()));
            if (inserted) {
                c.forms.push_back(form);
                c.class_sizes.push_back(0);
                c.representative.push_back(i);
            }
            c.class_of[i] = it->second;
            ++c.class_sizes[it->second];
        }
        return c;
    }();
    return census;
}

std::uint32_t class_id(const Genotype& g) { return space_census().class_of[g.index()]; }

std::vector<Genotype> neighbors(const Genotype& g) {
    std::vector<Genotype> out;
    out.reserve(kNeighborCount);
    for (std::size_t e = 0; e < kNumEdges; ++e) {
        for (Operator op : kOperators) {
            if (op == g.op(e)) continue;
            Genotype h = g;
            h.set_op(e, op);
            out.push_back(h);
        }
    }
    return out;
}

Genotype mutate(const Genotype& g, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick_edge(0, kNumEdges - 1);
    std::uniform_int_distribution<std::size_t> pick_alt(0, kNumOperators - 2);
    const std::size_t e = pick_edge(rng);
    std::size_t alt = pick_alt(rng);
    // Skip over the current operator so the draw is uniform over the 4 alternatives.
    if (alt >= static_cast<std::size_t>(g.op(e))) ++alt;
    Genotype h = g;
    h.set_op(e, static_cast<Operator>(alt));
    return h;
}

}  // namespace robnas::cellspace
