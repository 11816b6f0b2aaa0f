#pragma once

#include "robnas/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace robnas::cellspace {

// Declaration order is the total order used for enumeration and tie-breaking.
enum class Operator : std::uint8_t {
    conv3x3 = 0,
    conv1x1 = 1,
    zeroize = 2,
    skip_connect = 3,
    avg_pool = 4,
};

inline constexpr std::size_t kNumOperators = 5;
inline constexpr std::size_t kNumEdges = 6;
inline constexpr std::size_t kNumNodes = 4;
inline constexpr std::size_t kSpaceSize = 15625;  // 5^6
inline constexpr std::size_t kNeighborCount = kNumEdges * (kNumOperators - 1);

struct Edge {
    int from;
    int to;
};

// Edge order of the 4-node cell: 0->1, 0->2, 1->2, 0->3, 1->3, 2->3.
inline constexpr std::array<Edge, kNumEdges> kEdges{{{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};

inline constexpr std::array<Operator, kNumOperators> kOperators{
    Operator::conv3x3, Operator::conv1x1, Operator::zeroize, Operator::skip_connect, Operator::avg_pool};

std::string_view operator_label(Operator op);
// Name used by the NAS-Bench-201 string format (nor_conv_3x3, none, ...).
std::string_view operator_interop_name(Operator op);

class Genotype {
public:
    Genotype() { ops_.fill(Operator::conv3x3); }
    explicit Genotype(const std::array<Operator, kNumEdges>& ops) : ops_(ops) {}

    // Mixed-radix index with edge 0 most significant; matches enumeration order.
    static Genotype from_index(std::size_t index);
    [[nodiscard]] std::size_t index() const;

    [[nodiscard]] Operator op(std::size_t edge) const { return ops_.at(edge); }
    void set_op(std::size_t edge, Operator op) { ops_.at(edge) = op; }
    [[nodiscard]] const std::array<Operator, kNumEdges>& ops() const { return ops_; }
    [[nodiscard]] std::size_t count(Operator op) const;

    auto operator<=>(const Genotype&) const = default;

private:
    std::array<Operator, kNumEdges> ops_;
};

std::vector<Genotype> enumerate_genotypes();

// "|op~0|+|op~0|op~1|+|op~0|op~1|op~2|"
Genotype parse_genotype(std::string_view text);
std::string format_genotype(const Genotype& g);

struct CanonicalCell {
    std::string canonical_form;  // byte string; see canonicalize()
    std::size_t class_size = 0;  // 0 when not computed against the full space

    [[nodiscard]] std::string hex() const;
};

// The per-edge rewrite rules. Each maps an incoming edge to a term given the
// term of its source node; the first rule that fires wins.
enum class EdgeRule : std::uint8_t {
    zeroize_to_zero,     // a zeroize edge contributes the zero marker
    dead_source_to_zero, // an edge out of a zero node contributes the zero marker
    skip_passthrough,    // a skip edge contributes its source term unchanged
};

// Reduces the cell to a canonical term: each node is the sorted multiset of its
// incoming edge terms, where zeroize edges and edges leaving a zero node yield
// the zero marker "#", skip edges pass the source term through, and any other
// operator wraps it as "(src)@label". The output node's term is the canonical form.
CanonicalCell canonicalize(const Genotype& g);

// Same reduction with a caller-chosen rule order and incoming-edge visiting order.
// Used to check that the result does not depend on either.
CanonicalCell canonicalize_with_order(const Genotype& g, std::span<const EdgeRule, 3> rule_order,
                                      bool reverse_incoming);

// Dense class table over the whole space, computed once.
struct SpaceCensus {
    std::vector<std::uint32_t> class_of;          // genotype index -> class id
    std::vector<std::string> forms;               // class id -> canonical form
    std::vector<std::size_t> class_sizes;         // class id -> member count
    std::vector<std::size_t> representative;      // class id -> smallest member index
};

const SpaceCensus& space_census();
std::uint32_t class_id(const Genotype& g);

std::vector<Genotype> neighbors(const Genotype& g);
Genotype mutate(const Genotype& g, Rng& rng);

std::string to_hex(std::string_view bytes);

}  // namespace robnas::cellspace
