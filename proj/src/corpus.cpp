#include "monomer/corpus.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace monomer {
namespace {

// Feature file layout ("MNMR"):
//   magic "MNMR" | version u16 | F u32 | row count u64
//   per row: id length u16 | UTF-8 id bytes | F little-endian float32
constexpr char kFeatureMagic[4] = {'M', 'N', 'M', 'R'};
constexpr uint16_t kFeatureVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path, const char* what) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error(path + ": truncated while reading " + what);
  return value;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

Corpus::Corpus(std::vector<Item> items, FeatureMatrix features)
    : items_(std::move(items)), features_(std::move(features)) {
  index_.reserve(items_.size());
  std::vector<char> row_used(static_cast<size_t>(features_.rows()), 0);
  for (size_t i = 0; i < items_.size(); ++i) {
    const Item& item = items_[i];
    if (item.id.empty()) throw std::runtime_error("empty item id");
    if (item.category.empty())
      throw std::runtime_error("item '" + item.id + "' has empty category");
    if (!index_.emplace(item.id, static_cast<Eigen::Index>(i)).second)
      throw std::runtime_error("duplicate item id '" + item.id + "'");
    if (item.feature_row < 0 || item.feature_row >= features_.rows())
      throw std::runtime_error("item '" + item.id + "' has invalid feature row");
    if (row_used[static_cast<size_t>(item.feature_row)]++)
      throw std::runtime_error("feature row of item '" + item.id +
                               "' bound more than once");
  }
  for (Eigen::Index r = 0; r < features_.rows(); ++r)
    for (Eigen::Index c = 0; c < features_.cols(); ++c)
      if (!std::isfinite(features_(r, c)))
        throw std::runtime_error("non-finite feature value at row " +
                                 std::to_string(r) + ", column " + std::to_string(c));
}

Eigen::Index Corpus::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::runtime_error("unknown item id '" + id + "'");
  return it->second;
}

void write_feature_file(const std::string& path, const std::vector<std::string>& ids,
                        const FeatureMatrix& rows) {
  if (rows.rows() != static_cast<Eigen::Index>(ids.size()))
    throw std::runtime_error("feature row count does not match id count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(kFeatureMagic, 4);
  write_raw(out, kFeatureVersion);
  write_raw(out, static_cast<uint32_t>(rows.cols()));
  write_raw(out, static_cast<uint64_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const std::string& id = ids[static_cast<size_t>(r)];
    write_raw(out, static_cast<uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    out.write(reinterpret_cast<const char*>(rows.row(r).data()),
              static_cast<std::streamsize>(sizeof(float) * rows.cols()));
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace {

struct RawFeatures {
  std::vector<std::string> ids;
  FeatureMatrix rows;
};

RawFeatures read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw std::runtime_error(path + ": not a MNMR feature file");
  const auto version = read_raw<uint16_t>(in, path, "version");
  if (version != kFeatureVersion)
    throw std::runtime_error(path + ": unsupported feature file version " +
                             std::to_string(version));
  const auto dim = read_raw<uint32_t>(in, path, "dimension");
  if (dim == 0) throw std::runtime_error(path + ": feature dimension must be > 0");
  const auto count = read_raw<uint64_t>(in, path, "row count");

  RawFeatures raw;
  raw.ids.reserve(count);
  raw.rows.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (uint64_t r = 0; r < count; ++r) {
    const auto id_len = read_raw<uint16_t>(in, path, "id length");
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    if (!in) throw std::runtime_error(path + ": truncated id at row " + std::to_string(r));
    in.read(reinterpret_cast<char*>(raw.rows.row(static_cast<Eigen::Index>(r)).data()),
            static_cast<std::streamsize>(sizeof(float) * dim));
    if (!in)
      throw std::runtime_error(path + ": truncated feature row for item '" + id +
                               "' (expected " + std::to_string(dim) + " values)");
    for (uint32_t c = 0; c < dim; ++c)
      if (!std::isfinite(raw.rows(static_cast<Eigen::Index>(r), c)))
        throw std::runtime_error(path + ": non-finite feature value for item '" + id +
                                 "' at column " + std::to_string(c));
    raw.ids.push_back(std::move(id));
  }
  return raw;
}

}  // namespace

Corpus load_corpus(const std::string& items_path, const std::string& features_path,
                   bool l2_normalize) {
  std::ifstream in(items_path);
  if (!in) throw std::runtime_error("cannot open items file '" + items_path + "'");

  std::vector<Item> items;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw std::runtime_error(items_path + ":" + std::to_string(line_no) +
                               ": expected `id<TAB>category`");
    items.push_back(Item{fields[0], fields[1], -1});
  }
  if (items.empty()) throw std::runtime_error(items_path + ": no items");

  RawFeatures raw = read_feature_file(features_path);
  std::unordered_map<std::string, Eigen::Index> row_of;
  row_of.reserve(raw.ids.size());
  for (size_t r = 0; r < raw.ids.size(); ++r)
    if (!row_of.emplace(raw.ids[r], static_cast<Eigen::Index>(r)).second)
      throw std::runtime_error(features_path + ": duplicate feature row for item '" +
                               raw.ids[r] + "'");

  std::set<std::string> listed;
  for (Item& item : items) {
    auto it = row_of.find(item.id);
    if (it == row_of.end())
      throw std::runtime_error("item '" + item.id + "' has no feature row in '" +
                               features_path + "'");
    item.feature_row = it->second;
    listed.insert(item.id);
  }
  for (const std::string& id : raw.ids)
    if (!listed.count(id))
      throw std::runtime_error(features_path + ": feature row for item '" + id +
                               "' absent from the item list");

  if (l2_normalize) {
    for (Eigen::Index r = 0; r < raw.rows.rows(); ++r) {
      float norm = raw.rows.row(r).norm();
      if (norm > 0) raw.rows.row(r) /= norm;
    }
  }
  return Corpus(std::move(items), std::move(raw.rows));
}

void save_corpus(const Corpus& corpus, const std::string& items_path,
                 const std::string& features_path) {
  std::ofstream out(items_path);
  if (!out) throw std::runtime_error("cannot open '" + items_path + "' for writing");
  for (const Item& item : corpus.items()) out << item.id << '\t' << item.category << '\n';
  if (!out) throw std::runtime_error("write failed for '" + items_path + "'");

  std::vector<std::string> ids;
  ids.reserve(static_cast<size_t>(corpus.size()));
  FeatureMatrix rows(corpus.size(), corpus.dim());
  for (Eigen::Index i = 0; i < corpus.size(); ++i) {
    ids.push_back(corpus.item(i).id);
    rows.row(i) = corpus.features().row(corpus.item(i).feature_row);
  }
  write_feature_file(features_path, ids, rows);
}

RelationSet load_relations(const Corpus& corpus, const std::string& edges_path,
                           RelationLoadStats* stats) {
  std::ifstream in(edges_path);
  if (!in) throw std::runtime_error("cannot open edge file '" + edges_path + "'");

  RelationSet rel;
  RelationLoadStats local;
  std::set<std::tuple<Eigen::Index, Eigen::Index, Label>> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2 && fields.size() != 3)
      throw std::runtime_error(edges_path + ":" + std::to_string(line_no) +
                               ": expected `src<TAB>dst[<TAB>label]`");
    Label label = Label::positive;
    if (fields.size() == 3) {
      if (fields[2] == "1")
        label = Label::positive;
      else if (fields[2] == "0")
        label = Label::negative;
      else
        throw std::runtime_error(edges_path + ":" + std::to_string(line_no) +
                                 ": label must be 1 or 0, got '" + fields[2] + "'");
    }
    Eigen::Index src, dst;
    try {
      src = corpus.index_of(fields[0]);
      dst = corpus.index_of(fields[1]);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(edges_path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    if (corpus.item(src).category == corpus.item(dst).category) {
      ++local.same_category_dropped;
      continue;
    }
    if (!seen.emplace(src, dst, label).second)
      throw std::runtime_error(edges_path + ":" + std::to_string(line_no) +
                               ": duplicate edge");
    rel.pairs.push_back(Pair{src, dst, label});
    ++local.accepted;
  }
  if (stats) *stats = local;
  return rel;
}

void save_relations(const Corpus& corpus, const RelationSet& relations,
                    const std::string& edges_path) {
  std::ofstream out(edges_path);
  if (!out) throw std::runtime_error("cannot open '" + edges_path + "' for writing");
  for (const Pair& p : relations.pairs)
    out << corpus.item(p.src).id << '\t' << corpus.item(p.dst).id << '\t'
        << (p.label == Label::positive ? '1' : '0') << '\n';
  if (!out) throw std::runtime_error("write failed for '" + edges_path + "'");
}

}  // namespace monomer
