#include "hackg/kgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "hackg/rng.hpp"

namespace hackg {

namespace {

constexpr std::string_view kEntityKindNames[kNumEntityKinds] = {
    "cosmetic", "ingredient", "brand",       "category",  "toxicity", "allergy",
    "cancer",   "restriction", "min_score", "max_score", "status",
};

constexpr std::string_view kRelationNames[kNumRelationKinds] = {
    "has_ingredient", "has_brand", "has_category", "has_property", "has_status",
};

bool pattern_legal(EntityKind head, RelationKind relation, EntityKind tail) {
  switch (relation) {
    case RelationKind::HasIngredient:
      return head == EntityKind::Cosmetic && tail == EntityKind::Ingredient;
    case RelationKind::HasBrand:
      return head == EntityKind::Cosmetic && tail == EntityKind::Brand;
    case RelationKind::HasCategory:
      return head == EntityKind::Cosmetic && tail == EntityKind::Category;
    case RelationKind::HasProperty:
      return head == EntityKind::Ingredient && is_property_kind(tail);
    case RelationKind::HasStatus:
      return head == EntityKind::Cosmetic && tail == EntityKind::Status;
  }
  return false;
}

uint64_t triple_key(int64_t head, RelationKind relation, int64_t tail, int64_t n_entities) {
  return (static_cast<uint64_t>(head) * kNumRelationKinds + static_cast<uint64_t>(relation)) *
             static_cast<uint64_t>(n_entities) +
         static_cast<uint64_t>(tail);
}

}  // namespace

int edge_type_id(RelationKind relation, EdgeDir dir) {
  switch (dir) {
    case EdgeDir::Forward:
      return static_cast<int>(relation);
    case EdgeDir::Inverse:
      return kNumRelationKinds + static_cast<int>(relation);
    case EdgeDir::SelfLoop:
      return kSelfLoopEdgeType;
  }
  return kSelfLoopEdgeType;
}

std::string_view entity_kind_name(EntityKind kind) {
  return kEntityKindNames[static_cast<int>(kind)];
}

EntityKind entity_kind_from_name(std::string_view name) {
  for (int i = 0; i < kNumEntityKinds; ++i) {
    if (kEntityKindNames[i] == name) return static_cast<EntityKind>(i);
  }
  throw Error("unknown entity kind name: " + std::string(name));
}

std::string_view relation_name(RelationKind relation) {
  return kRelationNames[static_cast<int>(relation)];
}

RelationKind relation_from_name(std::string_view name) {
  for (int i = 0; i < kNumRelationKinds; ++i) {
    if (kRelationNames[i] == name) return static_cast<RelationKind>(i);
  }
  throw UnknownRelation("unknown relation name: " + std::string(name));
}

bool is_property_kind(EntityKind kind) {
  switch (kind) {
    case EntityKind::Toxicity:
    case EntityKind::Allergy:
    case EntityKind::Cancer:
    case EntityKind::Restriction:
    case EntityKind::MinScore:
    case EntityKind::MaxScore:
      return true;
    default:
      return false;
  }
}

int property_slot(EntityKind kind) {
  if (!is_property_kind(kind)) throw Error("property_slot: not a property kind");
  return static_cast<int>(kind) - static_cast<int>(EntityKind::Toxicity);
}

// --- CosmeticKG ---

CosmeticKG CosmeticKG::from_parts(std::vector<Entity> entities, std::vector<Triple> triples) {
  CosmeticKG kg;
  kg.entities_ = std::move(entities);
  kg.triples_ = std::move(triples);
  kg.build_indexes();
  return kg;
}

void CosmeticKG::build_indexes() {
  const int64_t n = num_entities();
  for (int64_t i = 0; i < n; ++i) {
    const Entity& e = entities_[static_cast<size_t>(i)];
    if (e.id != i) throw SchemaViolation("entity ids must be contiguous from 0");
    if (e.name.empty()) throw SchemaViolation("entity name must be non-empty");
    if (is_property_kind(e.kind)) {
      if (static_cast<int>(e.numeric_attrs.size()) != kNumericWidth) {
        throw SchemaViolation("property entity '" + e.name + "' needs " +
                              std::to_string(kNumericWidth) + " numeric attributes");
      }
      for (double v : e.numeric_attrs) {
        if (!std::isfinite(v)) throw SchemaViolation("non-finite numeric attribute on " + e.name);
      }
    } else if (!e.numeric_attrs.empty()) {
      throw SchemaViolation("non-property entity '" + e.name + "' carries numeric attributes");
    }
    type_index_[static_cast<int>(e.kind)].push_back(i);
    auto [it, inserted] = name_index_[static_cast<int>(e.kind)].emplace(fold_name(e.name), i);
    if (!inserted) {
      throw SchemaViolation("duplicate " + std::string(entity_kind_name(e.kind)) + " name '" +
                            e.name + "'");
    }
  }

  std::vector<int64_t> status_edges(static_cast<size_t>(n), 0);
  std::vector<int64_t> brand_edges(static_cast<size_t>(n), 0);
  std::vector<int64_t> category_edges(static_cast<size_t>(n), 0);
  triple_keys_.reserve(triples_.size() * 2);
  for (const Triple& t : triples_) {
    if (t.head < 0 || t.head >= n || t.tail < 0 || t.tail >= n) {
      throw SchemaViolation("triple references an unknown entity id");
    }
    const EntityKind hk = entities_[static_cast<size_t>(t.head)].kind;
    const EntityKind tk = entities_[static_cast<size_t>(t.tail)].kind;
    if (!pattern_legal(hk, t.relation, tk)) {
      throw SchemaViolation(std::string("illegal triple pattern (") +
                            std::string(entity_kind_name(hk)) + ", " +
                            std::string(relation_name(t.relation)) + ", " +
                            std::string(entity_kind_name(tk)) + ")");
    }
    if (!triple_keys_.insert(triple_key(t.head, t.relation, t.tail, n)).second) {
      throw SchemaViolation("duplicate triple");
    }
    switch (t.relation) {
      case RelationKind::HasStatus:
        if (++status_edges[static_cast<size_t>(t.head)] > 1) {
          throw DuplicateStatus("product '" + entities_[static_cast<size_t>(t.head)].name +
                                "' carries two statuses");
        }
        break;
      case RelationKind::HasBrand:
        if (++brand_edges[static_cast<size_t>(t.head)] > 1) {
          throw SchemaViolation("product '" + entities_[static_cast<size_t>(t.head)].name +
                                "' carries two brands");
        }
        break;
      case RelationKind::HasCategory:
        if (++category_edges[static_cast<size_t>(t.head)] > 1) {
          throw SchemaViolation("product '" + entities_[static_cast<size_t>(t.head)].name +
                                "' carries two categories");
        }
        break;
      default:
        break;
    }
  }

  // Adjacency: forward + inverse per triple plus one self-loop per entity.
  std::vector<std::vector<AdjEntry>> adj(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    adj[static_cast<size_t>(i)].push_back(AdjEntry{RelationKind::HasIngredient, EdgeDir::SelfLoop, i});
  }
  for (const Triple& t : triples_) {
    adj[static_cast<size_t>(t.head)].push_back(AdjEntry{t.relation, EdgeDir::Forward, t.tail});
    adj[static_cast<size_t>(t.tail)].push_back(AdjEntry{t.relation, EdgeDir::Inverse, t.head});
  }
  adjacency_offsets_.assign(static_cast<size_t>(n) + 1, 0);
  int64_t total = 0;
  for (int64_t i = 0; i < n; ++i) {
    auto& list = adj[static_cast<size_t>(i)];
    std::sort(list.begin(), list.end(), [](const AdjEntry& a, const AdjEntry& b) {
      if (a.edge_type() != b.edge_type()) return a.edge_type() < b.edge_type();
      return a.neighbor < b.neighbor;
    });
    adjacency_offsets_[static_cast<size_t>(i)] = total;
    total += static_cast<int64_t>(list.size());
  }
  adjacency_offsets_[static_cast<size_t>(n)] = total;
  adjacency_.reserve(static_cast<size_t>(total));
  for (auto& list : adj) {
    adjacency_.insert(adjacency_.end(), list.begin(), list.end());
  }
}

const Entity& CosmeticKG::entity(int64_t id) const {
  if (id < 0 || id >= num_entities()) {
    throw UnknownEntity("entity id " + std::to_string(id) + " out of range");
  }
  return entities_[static_cast<size_t>(id)];
}

std::span<const AdjEntry> CosmeticKG::neighbors(int64_t id) const {
  if (id < 0 || id >= num_entities()) {
    throw UnknownEntity("entity id " + std::to_string(id) + " out of range");
  }
  const int64_t begin = adjacency_offsets_[static_cast<size_t>(id)];
  const int64_t end = adjacency_offsets_[static_cast<size_t>(id) + 1];
  return {adjacency_.data() + begin, static_cast<size_t>(end - begin)};
}

const std::vector<int64_t>& CosmeticKG::entities_of(EntityKind kind) const {
  return type_index_[static_cast<int>(kind)];
}

std::optional<int64_t> CosmeticKG::find(EntityKind kind, std::string_view name) const {
  const auto& index = name_index_[static_cast<int>(kind)];
  auto it = index.find(fold_name(name));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

bool CosmeticKG::has_triple(int64_t head, RelationKind relation, int64_t tail) const {
  if (head < 0 || head >= num_entities() || tail < 0 || tail >= num_entities()) return false;
  return triple_keys_.count(triple_key(head, relation, tail, num_entities())) > 0;
}

std::optional<int64_t> CosmeticKG::status_of(int64_t product_id) const {
  for (const AdjEntry& e : neighbors(product_id)) {
    if (e.dir == EdgeDir::Forward && e.relation == RelationKind::HasStatus) return e.neighbor;
  }
  return std::nullopt;
}

std::vector<int64_t> CosmeticKG::labeled_products() const {
  std::vector<int64_t> out;
  for (int64_t p : entities_of(EntityKind::Cosmetic)) {
    if (status_of(p).has_value()) out.push_back(p);
  }
  return out;
}

CosmeticKG CosmeticKG::without_status_triples(const std::vector<int64_t>& product_ids) const {
  std::unordered_set<int64_t> drop(product_ids.begin(), product_ids.end());
  std::vector<Triple> kept;
  kept.reserve(triples_.size());
  for (const Triple& t : triples_) {
    if (t.relation == RelationKind::HasStatus && drop.count(t.head)) continue;
    kept.push_back(t);
  }
  return from_parts(entities_, std::move(kept));
}

KgStats CosmeticKG::stats() const {
  KgStats s;
  s.n_entities = num_entities();
  s.n_triples = num_triples();
  for (const Entity& e : entities_) ++s.entities_per_kind[static_cast<int>(e.kind)];
  for (const Triple& t : triples_) ++s.triples_per_relation[static_cast<int>(t.relation)];
  return s;
}

void CosmeticKG::export_triples_tsv(std::ostream& out) const {
  for (const Triple& t : triples_) {
    out << entities_[static_cast<size_t>(t.head)].name << '\t' << relation_name(t.relation)
        << '\t' << entities_[static_cast<size_t>(t.tail)].name << '\n';
  }
}

// --- build_from_records ---

namespace {

class GraphAssembler {
 public:
  int64_t intern(EntityKind kind, const std::string& name) {
    auto& index = by_name_[static_cast<int>(kind)];
    const std::string key = fold_name(name);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    const int64_t id = static_cast<int64_t>(entities_.size());
    entities_.push_back(Entity{id, kind, name, {}});
    index.emplace(key, id);
    return id;
  }

  Entity& entity(int64_t id) { return entities_[static_cast<size_t>(id)]; }

  bool add_triple(int64_t head, RelationKind relation, int64_t tail) {
    return triples_set_.insert({head, static_cast<int>(relation), tail}).second;
  }

  std::vector<Entity> take_entities() { return std::move(entities_); }
  std::vector<Triple> take_triples() {
    std::vector<Triple> out;
    out.reserve(ordered_triples_.size());
    for (const auto& t : ordered_triples_) out.push_back(t);
    return out;
  }

  void record(int64_t head, RelationKind relation, int64_t tail) {
    if (add_triple(head, relation, tail)) {
      ordered_triples_.push_back(Triple{head, relation, tail});
    }
  }

 private:
  std::vector<Entity> entities_;
  std::array<std::unordered_map<std::string, int64_t>, kNumEntityKinds> by_name_;
  std::set<std::tuple<int64_t, int, int64_t>> triples_set_;
  std::vector<Triple> ordered_triples_;
};

constexpr EntityKind kPropertyKinds[kNumericWidth] = {
    EntityKind::Toxicity, EntityKind::Allergy,  EntityKind::Cancer,
    EntityKind::Restriction, EntityKind::MinScore, EntityKind::MaxScore,
};

// The four state-like properties share nodes per distinct value; the two
// score properties always get per-ingredient nodes.
bool shared_value_property(int slot) { return slot < 4; }

}  // namespace

CosmeticKG build_from_records(std::span<const ProductRecord> products,
                              std::span<const IngredientRecord> ingredients,
                              const BuildOptions& options) {
  GraphAssembler as;

  std::unordered_map<std::string, const IngredientRecord*> props_by_name;
  for (const IngredientRecord& rec : ingredients) {
    if (rec.name.empty()) throw SchemaViolation("ingredient record with empty name");
    for (double v : rec.properties) {
      if (!std::isfinite(v)) {
        throw SchemaViolation("non-finite property value for ingredient '" + rec.name + "'");
      }
    }
    props_by_name[fold_name(rec.name)] = &rec;
  }

  bool any_status = false;
  for (const ProductRecord& rec : products) {
    if (!rec.status.empty()) any_status = true;
  }
  int64_t halal_id = -1, haram_id = -1;
  if (any_status) {
    halal_id = as.intern(EntityKind::Status, "halal");
    haram_id = as.intern(EntityKind::Status, "haram");
  }

  std::vector<int64_t> ingredient_order;
  std::unordered_set<int64_t> seen_ingredients;

  for (const ProductRecord& rec : products) {
    if (rec.product.empty() || rec.brand.empty() || rec.category.empty()) {
      throw SchemaViolation("product record with empty product/brand/category field");
    }
    const int64_t pid = as.intern(EntityKind::Cosmetic, rec.product);
    const int64_t bid = as.intern(EntityKind::Brand, rec.brand);
    const int64_t cid = as.intern(EntityKind::Category, rec.category);
    // record() dedups repeated rows; conflicting one-to-one edges are caught
    // by from_parts validation.
    as.record(pid, RelationKind::HasBrand, bid);
    as.record(pid, RelationKind::HasCategory, cid);
    for (const std::string& ing : rec.ingredients) {
      if (ing.empty()) throw SchemaViolation("empty ingredient name in product '" + rec.product + "'");
      const int64_t iid = as.intern(EntityKind::Ingredient, ing);
      as.record(pid, RelationKind::HasIngredient, iid);
      if (seen_ingredients.insert(iid).second) ingredient_order.push_back(iid);
    }
    if (!rec.status.empty()) {
      const std::string s = fold_name(rec.status);
      if (s != "halal" && s != "haram") {
        throw SchemaViolation("unknown status '" + rec.status + "' for product '" + rec.product + "'");
      }
      as.record(pid, RelationKind::HasStatus, s == "halal" ? halal_id : haram_id);
    }
  }

  // Property columns are min-max normalized over the values of ingredients
  // that actually appear in the graph; constant columns map to 0.5.
  std::array<double, kNumericWidth> col_min, col_max;
  col_min.fill(std::numeric_limits<double>::infinity());
  col_max.fill(-std::numeric_limits<double>::infinity());
  for (int64_t iid : ingredient_order) {
    auto it = props_by_name.find(fold_name(as.entity(iid).name));
    if (it == props_by_name.end()) continue;
    for (int c = 0; c < kNumericWidth; ++c) {
      col_min[static_cast<size_t>(c)] = std::min(col_min[static_cast<size_t>(c)], it->second->properties[static_cast<size_t>(c)]);
      col_max[static_cast<size_t>(c)] = std::max(col_max[static_cast<size_t>(c)], it->second->properties[static_cast<size_t>(c)]);
    }
  }
  auto normalize = [&](int slot, double v) {
    const double lo = col_min[static_cast<size_t>(slot)];
    const double hi = col_max[static_cast<size_t>(slot)];
    if (!(hi > lo)) return 0.5;
    return (v - lo) / (hi - lo);
  };

  for (int64_t iid : ingredient_order) {
    const std::string ing_name = as.entity(iid).name;
    auto it = props_by_name.find(fold_name(ing_name));
    if (it == props_by_name.end()) continue;  // ingredient without a property row
    const auto& values = it->second->properties;
    for (int slot = 0; slot < kNumericWidth; ++slot) {
      const EntityKind kind = kPropertyKinds[slot];
      const double raw = values[static_cast<size_t>(slot)];
      std::string node_name;
      if (options.property_mode == PropertyNodeMode::SharedCategorical &&
          shared_value_property(slot)) {
        node_name = std::string(entity_kind_name(kind)) + "=" + format_double(raw);
      } else {
        node_name = std::string(entity_kind_name(kind)) + ":" + ing_name;
      }
      const int64_t nid = as.intern(kind, node_name);
      Entity& node = as.entity(nid);
      if (node.numeric_attrs.empty()) {
        node.numeric_attrs.assign(kNumericWidth, 0.0);
        node.numeric_attrs[static_cast<size_t>(slot)] = normalize(slot, raw);
      }
      as.record(iid, RelationKind::HasProperty, nid);
    }
  }

  return CosmeticKG::from_parts(as.take_entities(), as.take_triples());
}

// --- splits ---

SplitSets split_status_pairs(const CosmeticKG& kg, const std::array<double, 3>& ratios,
                             uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r <= 0.0) throw ConfigInvalid("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigInvalid("split ratios must sum to 1");

  std::vector<int64_t> labeled = kg.labeled_products();
  const int64_t n = static_cast<int64_t>(labeled.size());
  if (n < 5) throw InsufficientData("need at least 5 status-labeled products");

  const auto halal = kg.find(EntityKind::Status, "halal");
  if (!halal) throw InsufficientData("graph has no halal status entity");

  Rng rng(seed);
  rng.shuffle(labeled);

  const int64_t n_train = static_cast<int64_t>(std::floor(ratios[0] * static_cast<double>(n) + 1e-9));
  const int64_t n_val = static_cast<int64_t>(std::floor(ratios[1] * static_cast<double>(n) + 1e-9));
  const int64_t n_test = n - n_train - n_val;
  if (n_train <= 0 || n_val <= 0 || n_test <= 0) {
    throw InsufficientData("a split would be empty");
  }

  auto make_pair = [&](int64_t product) {
    const auto status = kg.status_of(product);
    return StatusPair{product, *halal, status && *status == *halal ? 1 : 0};
  };

  SplitSets out;
  for (int64_t i = 0; i < n; ++i) {
    const StatusPair pair = make_pair(labeled[static_cast<size_t>(i)]);
    if (i < n_train) {
      out.train.push_back(pair);
    } else if (i < n_train + n_val) {
      out.val.push_back(pair);
    } else {
      out.test.push_back(pair);
    }
  }
  return out;
}

}  // namespace hackg
