#include "rwce/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rwce/random.hpp"

namespace rwce {

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kCal: return "cal";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "cal") return Split::kCal;
  if (name == "test") return Split::kTest;
  throw ConfigError("split: unknown name '" + name + "'");
}

const Partition& SplitDataset::part(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kCal: return cal;
    case Split::kTest: return test;
  }
  return train;
}

Partition& SplitDataset::part(Split s) {
  return const_cast<Partition&>(static_cast<const SplitDataset*>(this)->part(s));
}

Eigen::Index SplitDataset::total_size() const {
  return train.size() + val.size() + cal.size() + test.size();
}

void validate_synthetic_spec(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("synthetic: num_classes must be >= 2");
  if (spec.feature_dim < 1) throw ConfigError("synthetic: feature_dim must be >= 1");
  if (spec.clusters_per_class < 1) throw ConfigError("synthetic: clusters_per_class must be >= 1");
  if (!(spec.separation > 0.0)) throw ConfigError("synthetic: separation must be > 0");
  if (!(spec.noise_scale > 0.0)) throw ConfigError("synthetic: noise_scale must be > 0");
  if (spec.n_train < 0 || spec.n_val < 0 || spec.n_cal < 0 || spec.n_test < 0)
    throw ConfigError("synthetic: partition counts must be >= 0");
  if (spec.n_train + spec.n_val + spec.n_cal + spec.n_test == 0)
    throw ConfigError("synthetic: at least one partition must be nonempty");
}

SplitDataset generate_synthetic(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  auto eng = make_engine(spec.seed, Stream::kSyntheticData);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> label_dist(0, spec.num_classes - 1);
  std::uniform_int_distribution<int> cluster_dist(0, spec.clusters_per_class - 1);

  // Cluster means ~ separation * N(0, I/d): unit expected norm times the
  // separation, one row per (class, cluster).
  std::vector<Matrix> means(static_cast<std::size_t>(spec.num_classes),
                            Matrix(spec.clusters_per_class, spec.feature_dim));
  const double mean_scale = spec.separation / std::sqrt(static_cast<double>(spec.feature_dim));
  for (int k = 0; k < spec.num_classes; ++k)
    for (int c = 0; c < spec.clusters_per_class; ++c)
      for (int j = 0; j < spec.feature_dim; ++j)
        means[static_cast<std::size_t>(k)](c, j) = mean_scale * gauss(eng);

  const long total = spec.n_train + spec.n_val + spec.n_cal + spec.n_test;
  Matrix x(total, spec.feature_dim);
  IntVector y(total);
  for (long i = 0; i < total; ++i) {
    const int label = label_dist(eng);
    const int cluster = cluster_dist(eng);
    y[i] = label;
    for (int j = 0; j < spec.feature_dim; ++j)
      x(i, j) = means[static_cast<std::size_t>(label)](cluster, j) + spec.noise_scale * gauss(eng);
  }

  SplitDataset data;
  data.feature_dim = spec.feature_dim;
  data.num_classes = spec.num_classes;
  data.provenance = "synthetic(seed=" + std::to_string(spec.seed) +
                    ",separation=" + format_double(spec.separation) + ")";
  long offset = 0;
  auto take = [&](Partition& part, long count) {
    part.x = x.middleRows(offset, count);
    part.y = y.segment(offset, count);
    part.ids.resize(static_cast<std::size_t>(count));
    std::iota(part.ids.begin(), part.ids.end(), offset);
    offset += count;
  };
  take(data.train, spec.n_train);
  take(data.val, spec.n_val);
  take(data.cal, spec.n_cal);
  take(data.test, spec.n_test);
  return data;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, long line_no) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("csv: malformed number '" + s + "' at line " + std::to_string(line_no));
  return v;
}

long parse_long(const std::string& s, long line_no) {
  long v = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("csv: malformed integer '" + s + "' at line " + std::to_string(line_no));
  return v;
}

Partition gather(const Matrix& x, const IntVector& y, const std::vector<std::int64_t>& ids,
                 const std::vector<long>& rows) {
  Partition part;
  part.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  part.y.resize(static_cast<Eigen::Index>(rows.size()));
  part.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    part.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    part.y[static_cast<Eigen::Index>(i)] = y[rows[i]];
    part.ids.push_back(ids[static_cast<std::size_t>(rows[i])]);
  }
  return part;
}

}  // namespace

SplitDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("csv: cannot open " + path.string());

  std::string header;
  if (!std::getline(in, header)) throw ConfigError("csv: missing header in " + path.string());
  const auto columns = split_fields(header);
  int feature_dim = 0;
  int label_col = -1;
  int split_col = -1;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == "f" + std::to_string(feature_dim) && label_col < 0) {
      ++feature_dim;
    } else if (columns[c] == "label") {
      label_col = static_cast<int>(c);
    } else if (columns[c] == "split") {
      split_col = static_cast<int>(c);
    } else {
      throw ConfigError("csv: unexpected column '" + columns[c] + "' in " + path.string());
    }
  }
  if (feature_dim == 0 || label_col < 0)
    throw ConfigError("csv: header must list f0..f{d-1} followed by label");

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<Split> splits;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != columns.size())
      throw ConfigError("csv: wrong field count at line " + std::to_string(line_no));
    for (int j = 0; j < feature_dim; ++j) values.push_back(parse_double(fields[j], line_no));
    const long raw_label = parse_long(fields[label_col], line_no);
    if (raw_label < 1 || (schema.num_classes > 0 && raw_label > schema.num_classes))
      throw ConfigError("csv: label " + std::to_string(raw_label) + " out of range at line " +
                        std::to_string(line_no));
    labels.push_back(static_cast<int>(raw_label - 1));
    if (split_col >= 0) splits.push_back(split_from_name(fields[split_col]));
  }

  const long n = static_cast<long>(labels.size());
  Matrix x(n, feature_dim);
  IntVector y(n);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < feature_dim; ++j) x(i, j) = values[static_cast<std::size_t>(i) * feature_dim + j];
    y[i] = labels[static_cast<std::size_t>(i)];
    ids[static_cast<std::size_t>(i)] = i;
  }

  SplitDataset data;
  data.feature_dim = feature_dim;
  data.num_classes = schema.num_classes > 0 ? schema.num_classes : (n > 0 ? y.maxCoeff() + 1 : 0);
  data.provenance = "csv(" + path.filename().string() + ")";

  std::vector<long> rows_of[4];
  if (split_col >= 0) {
    for (long i = 0; i < n; ++i) rows_of[static_cast<int>(splits[static_cast<std::size_t>(i)])].push_back(i);
  } else {
    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto eng = make_engine(schema.split_seed, Stream::kCsvSplit);
    std::shuffle(order.begin(), order.end(), eng);
    const long n_train = static_cast<long>(schema.train_fraction * static_cast<double>(n));
    const long n_val = static_cast<long>(schema.val_fraction * static_cast<double>(n));
    const long n_cal = static_cast<long>(schema.cal_fraction * static_cast<double>(n));
    for (long i = 0; i < n; ++i) {
      const int bucket = i < n_train ? 0 : i < n_train + n_val ? 1 : i < n_train + n_val + n_cal ? 2 : 3;
      rows_of[bucket].push_back(order[static_cast<std::size_t>(i)]);
    }
  }
  data.train = gather(x, y, ids, rows_of[0]);
  data.val = gather(x, y, ids, rows_of[1]);
  data.cal = gather(x, y, ids, rows_of[2]);
  data.test = gather(x, y, ids, rows_of[3]);
  if (schema.standardize) standardize_features(data);
  return data;
}

void save_csv(const SplitDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IntegrityError("csv: cannot open for write: " + path.string());
  for (int j = 0; j < data.feature_dim; ++j) out << 'f' << j << ',';
  out << "label,split\n";
  for (Split s : {Split::kTrain, Split::kVal, Split::kCal, Split::kTest}) {
    const Partition& part = data.part(s);
    for (Eigen::Index i = 0; i < part.size(); ++i) {
      for (int j = 0; j < data.feature_dim; ++j) out << format_double(part.x(i, j)) << ',';
      out << (part.y[i] + 1) << ',' << split_name(s) << '\n';
    }
  }
  if (!out) throw IntegrityError("csv: short write: " + path.string());
}

SplitDataset resplit(const SplitDataset& data, double cal_fraction, double test_fraction,
                     std::uint64_t seed) {
  if (!(cal_fraction > 0.0 && cal_fraction < 1.0) || !(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("resplit: fractions must be in (0,1)");
  if (cal_fraction + test_fraction > 1.0 + 1e-12)
    throw ConfigError("resplit: fractions must sum to at most 1");
  const long pool_size = data.cal.size() + data.test.size();
  if (pool_size == 0) throw ConfigError("resplit: empty cal+test pool");

  Matrix pool_x(pool_size, data.feature_dim);
  IntVector pool_y(pool_size);
  std::vector<std::int64_t> pool_ids;
  pool_ids.reserve(static_cast<std::size_t>(pool_size));
  pool_x.topRows(data.cal.size()) = data.cal.x;
  pool_x.bottomRows(data.test.size()) = data.test.x;
  pool_y.head(data.cal.size()) = data.cal.y;
  pool_y.tail(data.test.size()) = data.test.y;
  pool_ids.insert(pool_ids.end(), data.cal.ids.begin(), data.cal.ids.end());
  pool_ids.insert(pool_ids.end(), data.test.ids.begin(), data.test.ids.end());

  std::vector<long> order(static_cast<std::size_t>(pool_size));
  std::iota(order.begin(), order.end(), 0);
  auto eng = make_engine(seed, Stream::kResplit);
  std::shuffle(order.begin(), order.end(), eng);

  const long n_cal = static_cast<long>(cal_fraction * static_cast<double>(pool_size) + 0.5);
  const long n_test = std::min<long>(pool_size - n_cal,
                                     static_cast<long>(test_fraction * static_cast<double>(pool_size) + 0.5));
  if (n_cal < 1 || n_test < 1) throw ConfigError("resplit: fractions leave an empty partition");

  std::vector<long> cal_rows(order.begin(), order.begin() + n_cal);
  std::vector<long> test_rows(order.begin() + n_cal, order.begin() + n_cal + n_test);

  SplitDataset out = data;
  out.cal = gather(pool_x, pool_y, pool_ids, cal_rows);
  out.test = gather(pool_x, pool_y, pool_ids, test_rows);
  return out;
}

void standardize_features(SplitDataset& data) {
  if (data.train.size() == 0) throw ConfigError("standardize: empty train split");
  const Vector mean = data.train.x.colwise().mean();
  Vector sd(data.feature_dim);
  for (int j = 0; j < data.feature_dim; ++j) {
    const double var =
        (data.train.x.col(j).array() - mean[j]).square().sum() / static_cast<double>(data.train.size());
    sd[j] = std::sqrt(var);
    if (sd[j] < 1e-12) sd[j] = 1.0;
  }
  for (Split s : {Split::kTrain, Split::kVal, Split::kCal, Split::kTest}) {
    Partition& part = data.part(s);
    if (part.size() == 0) continue;
    part.x = (part.x.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
  }
}

}  // namespace rwce
