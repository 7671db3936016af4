#pragma once
// Cosmetic knowledge graph: typed entities, typed triples, and per-entity
// adjacency with inverse edges and self-loops.
//
// Schema (legal head-kind / relation / tail-kind patterns):
//   Cosmetic  --has_ingredient--> Ingredient      (one-to-many)
//   Cosmetic  --has_brand------> Brand            (one-to-one)
//   Cosmetic  --has_category---> Category         (one-to-one)
//   Ingredient --has_property--> one of the six ingredient property kinds
//   Cosmetic  --has_status-----> Status           (one-to-one)
//
// Graphs are immutable after construction and safe for concurrent reads.

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hackg/errors.hpp"
#include "hackg/text.hpp"

namespace hackg {

enum class EntityKind : uint8_t {
  Cosmetic = 0,
  Ingredient,
  Brand,
  Category,
  Toxicity,
  Allergy,
  Cancer,
  Restriction,
  MinScore,
  MaxScore,
  Status,
};
inline constexpr int kNumEntityKinds = 11;

enum class RelationKind : uint8_t {
  HasIngredient = 0,
  HasBrand,
  HasCategory,
  HasProperty,
  HasStatus,
};
inline constexpr int kNumRelationKinds = 5;

enum class EdgeDir : uint8_t { Forward = 0, Inverse, SelfLoop };

// Width of the numeric attribute vector: one slot per ingredient property
// kind, in declaration order Toxicity..MaxScore.
inline constexpr int kNumericWidth = 6;

// Edge types index the relation-embedding table: 5 forward, 5 inverse, then
// the self-loop as its own type.
inline constexpr int kNumEdgeTypes = 2 * kNumRelationKinds + 1;
inline constexpr int kSelfLoopEdgeType = kNumEdgeTypes - 1;

int edge_type_id(RelationKind relation, EdgeDir dir);

std::string_view entity_kind_name(EntityKind kind);
EntityKind entity_kind_from_name(std::string_view name);
std::string_view relation_name(RelationKind relation);
RelationKind relation_from_name(std::string_view name);

bool is_property_kind(EntityKind kind);
// Slot of a property kind inside the numeric attribute vector (0..5).
int property_slot(EntityKind kind);

struct Entity {
  int64_t id = -1;
  EntityKind kind = EntityKind::Cosmetic;
  std::string name;
  // Present only for property-bearing kinds; length kNumericWidth.
  std::vector<double> numeric_attrs;
};

struct Triple {
  int64_t head = -1;
  RelationKind relation = RelationKind::HasIngredient;
  int64_t tail = -1;

  bool operator==(const Triple&) const = default;
};

struct AdjEntry {
  RelationKind relation = RelationKind::HasIngredient;  // unused for self-loops
  EdgeDir dir = EdgeDir::Forward;
  int64_t neighbor = -1;

  int edge_type() const { return edge_type_id(relation, dir); }
  bool operator==(const AdjEntry&) const = default;
};

struct KgStats {
  std::array<int64_t, kNumEntityKinds> entities_per_kind{};
  std::array<int64_t, kNumRelationKinds> triples_per_relation{};
  int64_t n_entities = 0;
  int64_t n_triples = 0;
};

class CosmeticKG {
 public:
  CosmeticKG() = default;  // empty graph

  // Validates the schema, deduplicates nothing (entities/triples must
  // already be unique), and materializes adjacency: forward edges, one
  // inverse entry per forward triple, and one self-loop per entity.
  static CosmeticKG from_parts(std::vector<Entity> entities, std::vector<Triple> triples);

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Triple>& triples() const { return triples_; }
  int64_t num_entities() const { return static_cast<int64_t>(entities_.size()); }
  int64_t num_triples() const { return static_cast<int64_t>(triples_.size()); }

  const Entity& entity(int64_t id) const;
  // Forward + inverse edges + the self-loop, sorted by edge type then
  // neighbor id. Throws UnknownEntity for an out-of-range id.
  std::span<const AdjEntry> neighbors(int64_t id) const;

  const std::vector<int64_t>& entities_of(EntityKind kind) const;
  std::optional<int64_t> find(EntityKind kind, std::string_view name) const;
  bool has_triple(int64_t head, RelationKind relation, int64_t tail) const;

  // The status entity a product points at, if any.
  std::optional<int64_t> status_of(int64_t product_id) const;
  // Products that carry a status edge, ascending by id.
  std::vector<int64_t> labeled_products() const;

  // Copy of this graph with the has_status triples of the given products
  // removed (label-leakage guard for validation/test products). Entities are
  // unchanged and keep their ids.
  CosmeticKG without_status_triples(const std::vector<int64_t>& product_ids) const;

  KgStats stats() const;
  // One `head<TAB>relation<TAB>tail` line per triple, construction order.
  void export_triples_tsv(std::ostream& out) const;

 private:
  void build_indexes();

  std::vector<Entity> entities_;
  std::vector<Triple> triples_;
  std::vector<AdjEntry> adjacency_;          // flattened, grouped by entity
  std::vector<int64_t> adjacency_offsets_;   // size num_entities + 1
  std::array<std::vector<int64_t>, kNumEntityKinds> type_index_;
  std::array<std::unordered_map<std::string, int64_t>, kNumEntityKinds> name_index_;
  std::unordered_set<uint64_t> triple_keys_;
};

// --- construction from product records ---

// Controls how ingredient property values become entities. SharedCategorical
// creates one node per distinct value of the four state-like properties
// (toxicity, allergy, cancer, restriction) shared across ingredients, and a
// per-ingredient node for the two continuous score properties. PerIngredient
// creates a per-ingredient node for all six.
enum class PropertyNodeMode { SharedCategorical, PerIngredient };

struct BuildOptions {
  PropertyNodeMode property_mode = PropertyNodeMode::SharedCategorical;
};

struct ProductRecord {
  std::string product;
  std::string brand;
  std::string category;
  std::vector<std::string> ingredients;
  std::string status;  // "halal", "haram", or empty when unlabeled
};

struct IngredientRecord {
  std::string name;
  // toxicity, allergy, cancer, restriction, min_score, max_score
  std::array<double, kNumericWidth> properties{};
};

// Builds a schema-valid graph. Entity names are deduplicated per kind after
// case folding; numeric property values are min-max normalized per property
// column over the whole graph (constant columns map to 0.5).
CosmeticKG build_from_records(std::span<const ProductRecord> products,
                              std::span<const IngredientRecord> ingredients,
                              const BuildOptions& options = {});

// --- training splits ---

// One supervised example: the (product, S_halal) pair with label 1 when the
// product's stored status is halal.
struct StatusPair {
  int64_t product = -1;
  int64_t status = -1;  // id of the halal status entity
  int label = 0;
};

struct SplitSets {
  std::vector<StatusPair> train, val, test;
};

// Partitions status-labeled products. Deterministic given the seed; each
// labeled product lands in exactly one split.
SplitSets split_status_pairs(const CosmeticKG& kg, const std::array<double, 3>& ratios,
                             uint64_t seed);

}  // namespace hackg
