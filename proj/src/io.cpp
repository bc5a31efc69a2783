#include "corrprobit/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "corrprobit/sampling.hpp"

namespace corrprobit {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_integer(const std::string& s, std::size_t line, const char* field) {
  T value{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    parse_fail(line, std::string("invalid ") + field + " '" + s + "'");
  return value;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  return out;
}

Json triple_json(const Triple& t) { return Json::array({t[0], t[1], t[2]}); }

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

Json model_to_json(const ProbitModel& model) {
  Json j;
  j["n"] = model.n();
  j["mu"] = vector_json(model.mu);
  j["sigma"] = matrix_json(model.sigma);
  j["normalized"] = model.normalized;
  return j;
}

ProbitModel model_from_json(const Json& j) {
  try {
    const int n = j.at("n").get<int>();
    if (n < 2) fail(ErrorCode::InvalidArgument, "model needs at least two items");
    const auto& mu = j.at("mu");
    const auto& sigma = j.at("sigma");
    if (!mu.is_array() || static_cast<int>(mu.size()) != n) fail(ErrorCode::InvalidArgument, "mu length differs from n");
    if (!sigma.is_array() || static_cast<int>(sigma.size()) != n)
      fail(ErrorCode::InvalidArgument, "sigma row count differs from n");
    Eigen::VectorXd m(n);
    Eigen::MatrixXd s(n, n);
    for (int i = 0; i < n; ++i) {
      m(i) = mu.at(i).get<double>();
      if (!sigma.at(i).is_array() || static_cast<int>(sigma.at(i).size()) != n)
        fail(ErrorCode::InvalidArgument, "sigma row length differs from n");
      for (int c = 0; c < n; ++c) s(i, c) = sigma.at(i).at(c).get<double>();
    }
    ProbitModel model = make_model(m, s);
    model.normalized = j.value("normalized", false);
    if (model.normalized) check_normalized(model);
    return model;
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
}

void write_model_file(const std::string& path, const ProbitModel& model) {
  write_text_file(path, model_to_json(model).dump(2) + "\n");
}

ProbitModel read_model_file(const std::string& path) {
  auto in = open_input(path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, "'" + path + "': " + e.what());
  }
  return model_from_json(j);
}

TripleCounts canonical_counts(const TripleCounts& c) {
  const Triple& t = c.triple;
  if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) fail(ErrorCode::InvalidArgument, "triple items must be distinct");
  std::array<int, 3> pos{0, 1, 2};
  std::sort(pos.begin(), pos.end(), [&](int a, int b) { return t[a] < t[b]; });
  TripleCounts out;
  for (int r = 0; r < 3; ++r) out.triple[r] = t[pos[r]];
  // rank_of[p]: sorted rank of original position p.
  std::array<int, 3> rank_of{};
  for (int r = 0; r < 3; ++r) rank_of[pos[r]] = r;
  for (int o = 0; o < 6; ++o) {
    const auto& ord = kOrderings[o];
    out.counts[ordering_index(rank_of[ord[0]], rank_of[ord[1]], rank_of[ord[2]])] += c.counts[o];
  }
  return out;
}

void write_counts_csv(std::ostream& out, const std::vector<TripleCounts>& counts) {
  std::map<Triple, std::array<std::uint64_t, 6>> merged;
  for (const auto& c : counts) {
    const TripleCounts cc = canonical_counts(c);
    auto& slot = merged[cc.triple];
    for (int o = 0; o < 6; ++o) slot[o] += cc.counts[o];
  }
  out << "i,j,k,perm,count\n";
  for (const auto& [t, c] : merged)
    for (int o = 0; o < 6; ++o) out << t[0] << ',' << t[1] << ',' << t[2] << ',' << ordering_code(o) << ',' << c[o] << '\n';
}

std::vector<TripleCounts> read_counts_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, "line 1: missing header");
  ++lineno;
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"i", "j", "k", "perm", "count"})
    parse_fail(lineno, "expected header i,j,k,perm,count");
  std::map<Triple, std::array<std::uint64_t, 6>> merged;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) parse_fail(lineno, "expected 5 fields, got " + std::to_string(f.size()));
    Triple t{parse_integer<int>(f[0], lineno, "item"), parse_integer<int>(f[1], lineno, "item"),
             parse_integer<int>(f[2], lineno, "item")};
    if (t[0] < 0 || !(t[0] < t[1] && t[1] < t[2])) parse_fail(lineno, "triple must be ascending non-negative ids");
    const int o = ordering_from_code(f[3]);
    if (o < 0) parse_fail(lineno, "unknown permutation code '" + f[3] + "'");
    merged[t][o] += parse_integer<std::uint64_t>(f[4], lineno, "count");
  }
  std::vector<TripleCounts> out;
  for (const auto& [t, c] : merged) out.push_back({t, c});
  return out;
}

void write_counts_file(const std::string& path, const std::vector<TripleCounts>& counts) {
  std::ostringstream s;
  write_counts_csv(s, counts);
  write_text_file(path, s.str());
}

std::vector<TripleCounts> read_counts_file(const std::string& path) {
  auto in = open_input(path);
  return read_counts_csv(in);
}

RankingDataset read_rankings_csv(std::istream& in) {
  RankingDataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv_line(line);
    if (lineno == 1 && f[0].rfind("user", 0) == 0) continue;
    if (f.size() < 2) parse_fail(lineno, "row needs a user id and at least one item");
    RankingRow row;
    row.user = f[0];
    for (std::size_t k = 1; k < f.size(); ++k) {
      if (f[k].empty()) continue;
      const int item = parse_integer<int>(f[k], lineno, "item");
      if (item < 0) parse_fail(lineno, "negative item id");
      row.items.push_back(item);
      data.item_count = std::max(data.item_count, item + 1);
    }
    std::vector<int> sorted = row.items;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorCode::DuplicateItemsInRow, "line " + std::to_string(lineno) + ": row repeats an item");
    data.rows.push_back(std::move(row));
  }
  return data;
}

RankingDataset read_rankings_file(const std::string& path) {
  auto in = open_input(path);
  return read_rankings_csv(in);
}

std::vector<TripleCounts> ingest_rankings(const RankingDataset& data, const IngestOptions& options) {
  std::map<Triple, std::array<std::uint64_t, 6>> merged;
  Rng rng(derive_seed(options.seed, 0x1a6e57));
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    const auto& items = data.rows[r].items;
    const int len = static_cast<int>(items.size());
    if (len < 3) fail(ErrorCode::InvalidArgument, "row for user '" + data.rows[r].user + "' ranks fewer than 3 items");
    std::vector<int> sorted = items;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorCode::DuplicateItemsInRow, "row for user '" + data.rows[r].user + "' repeats an item");
    std::vector<std::array<int, 3>> subsets;
    for (int a = 0; a < len; ++a)
      for (int b = a + 1; b < len; ++b)
        for (int c = b + 1; c < len; ++c) subsets.push_back({a, b, c});
    if (options.max_subsets_per_row && subsets.size() > *options.max_subsets_per_row) {
      std::shuffle(subsets.begin(), subsets.end(), rng);
      subsets.resize(*options.max_subsets_per_row);
    }
    for (const auto& s : subsets) {
      TripleCounts one;
      one.triple = {items[s[0]], items[s[1]], items[s[2]]};
      one.counts[0] = 1;  // positions already best-first
      const TripleCounts cc = canonical_counts(one);
      auto& slot = merged[cc.triple];
      for (int o = 0; o < 6; ++o) slot[o] += cc.counts[o];
    }
  }
  std::vector<TripleCounts> out;
  for (const auto& [t, c] : merged) out.push_back({t, c});
  return out;
}

Json diagnostics_to_json(const GlobalEstimate& e) {
  Json j;
  j["t_star"] = e.t_star;
  j["mu_objective"] = e.mu_objective;
  j["psd_repaired"] = e.psd_repaired;
  j["min_eigenvalue_before_repair"] = e.min_eigenvalue_before_repair;
  j["total_samples"] = e.total_samples;
  j["retries"] = e.retries;
  Json triples = Json::array();
  for (const auto& d : e.triples) {
    Json t;
    t["triple"] = triple_json(d.triple);
    t["samples"] = d.samples;
    t["gamma_hat"] = d.gamma_hat;
    t["angle_residuals"] = {d.angle_residuals[0], d.angle_residuals[1]};
    t["alpha_clamped"] = d.alpha_clamped;
    t["retried"] = d.retried;
    t["basis"] = d.case_tag == BasisCase::AbBc ? "ab-bc" : "ab-ac";
    auto it = e.per_triple_scales.find(d.triple);
    if (it != e.per_triple_scales.end()) t["scale"] = it->second;
    triples.push_back(t);
  }
  j["triples"] = triples;
  return j;
}

Json three_item_diagnostics_to_json(const TripleEstimateResult& r) {
  Json j;
  const auto& e = r.estimate;
  j["triple"] = triple_json(e.triple);
  j["samples"] = e.total;
  j["alphas"] = {e.alphas[0], e.alphas[1], e.alphas[2]};
  j["betas"] = {e.betas[0], e.betas[1], e.betas[2]};
  j["angle_residuals"] = {e.angle_residuals[0], e.angle_residuals[1]};
  j["alpha_clamped"] = {e.alpha_clamped[0], e.alpha_clamped[1], e.alpha_clamped[2]};
  j["beta_clamped"] = e.beta_clamped;
  j["basis"] = e.case_tag == BasisCase::AbBc ? "ab-bc" : "ab-ac";
  j["gamma_hat"] = r.observability.gamma_hat;
  j["gamma_below_warning"] = r.observability.below_warning;
  return j;
}

Json error_to_json(const Error& error) {
  Json j;
  j["error"] = std::string(error_name(error.code()));
  j["message"] = error.what();
  j["exit_code"] = exit_code_for(error.code());
  return j;
}

Json family_to_json(const EquivalenceFamily& f) {
  Json j;
  j["case"] = static_cast<int>(f.case_tag);
  j["case_items"] = {f.case_items.first, f.case_items.second};
  j["perturbation_scale"] = f.perturbation_scale;
  j["max_pairwise_deviation"] = f.max_pairwise_deviation;
  j["sigma_gaps"] = f.sigma_gaps;
  j["base"] = model_to_json(f.base);
  Json members = Json::array();
  for (const auto& m : f.members) members.push_back(model_to_json(m));
  j["members"] = members;
  return j;
}

Json lowerbound_to_json(const LowerBoundPair& p) {
  Json j;
  j["n"] = p.n;
  j["epsilon"] = p.epsilon;
  j["i_star"] = p.i_star;
  j["j_star"] = p.j_star;
  j["trace1"] = p.sigma1.trace();
  j["trace2"] = p.sigma2.trace();
  j["linf_gap"] = p.linf_gap;
  j["sigma1"] = matrix_json(p.sigma1);
  j["sigma2"] = matrix_json(p.sigma2);
  Json kl = Json::array();
  double worst = 0.0;
  for (const auto& [t, v] : p.kl_per_triple) {
    kl.push_back({{"triple", triple_json(t)}, {"kl", v}});
    worst = std::max(worst, v);
  }
  j["max_kl"] = worst;
  j["kl_per_triple"] = kl;
  return j;
}

Json report_to_json(const ExperimentReport& r) {
  Json j;
  j["method"] = r.method;
  j["regime"] = r.regime;
  j["q25"] = r.q25;
  j["q50"] = r.q50;
  j["q75"] = r.q75;
  j["mean"] = r.mean;
  j["std_error"] = r.std_error;
  j["trials"] = r.trials;
  j["fallbacks"] = r.fallbacks;
  j["runtime_seconds"] = r.runtime_seconds;
  Json curve = Json::array();
  for (const auto& [x, y] : r.error_curve) curve.push_back({x, y});
  j["error_curve"] = curve;
  Json cfg = Json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = cfg;
  return j;
}

Json welfare_to_json(const std::vector<WelfareMenuReport>& reports) {
  Json out = Json::array();
  for (const auto& r : reports) {
    Json j;
    j["method"] = r.method;
    j["size"] = r.size;
    j["menu"] = r.menu;
    j["true_value"] = r.true_value;
    j["true_std_error"] = r.true_std_error;
    j["best_rank_histogram"] = r.best_rank_histogram;
    out.push_back(j);
  }
  return out;
}

void write_reports_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << "regime,method,q25,q50,q75,mean,std_error,trials,fallbacks,runtime_seconds\n";
  for (const auto& r : reports)
    out << r.regime << ',' << r.method << ',' << format_double(r.q25) << ',' << format_double(r.q50) << ','
        << format_double(r.q75) << ',' << format_double(r.mean) << ',' << format_double(r.std_error) << ','
        << r.trials << ',' << r.fallbacks << ',' << format_double(r.runtime_seconds) << '\n';
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_output(path);
  out << content;
  if (!out) fail(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace corrprobit
