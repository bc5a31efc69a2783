#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "corrprobit/aggregator.hpp"
#include "corrprobit/error.hpp"
#include "corrprobit/estimator3.hpp"
#include "corrprobit/experiments.hpp"
#include "corrprobit/model.hpp"
#include "corrprobit/witness.hpp"
#include "json.hpp"

namespace corrprobit {

using Json = nlohmann::ordered_json;

// Model JSON: {"n", "mu", "sigma", "normalized"}.
Json model_to_json(const ProbitModel& model);
// Validates shape and symmetry; a model flagged normalized must satisfy the normalization invariants.
ProbitModel model_from_json(const Json& j);
void write_model_file(const std::string& path, const ProbitModel& model);
ProbitModel read_model_file(const std::string& path);

// Reorders the triple ascending and remaps the ordering counts accordingly.
TripleCounts canonical_counts(const TripleCounts& counts);

// Counts CSV: header "i,j,k,perm,count"; ascending item triple, perm code relative to it; six rows per triple.
void write_counts_csv(std::ostream& out, const std::vector<TripleCounts>& counts);
// Missing perm rows count as zero; repeated rows add up.
std::vector<TripleCounts> read_counts_csv(std::istream& in);
void write_counts_file(const std::string& path, const std::vector<TripleCounts>& counts);
std::vector<TripleCounts> read_counts_file(const std::string& path);

struct RankingRow {
  std::string user;
  std::vector<int> items;  // best first
};
struct RankingDataset {
  std::vector<RankingRow> rows;
  int item_count = 0;  // largest item id + 1
};

// Rows "user,item,item,..."; an optional first line starting with "user" is a header.
RankingDataset read_rankings_csv(std::istream& in);
RankingDataset read_rankings_file(const std::string& path);

struct IngestOptions {
  std::optional<std::size_t> max_subsets_per_row;  // uniform subsample when set
  std::uint64_t seed = 0;
};
// Every 3-subset of every row contributes one best-of-three observation.
std::vector<TripleCounts> ingest_rankings(const RankingDataset& data, const IngestOptions& options = {});

Json diagnostics_to_json(const GlobalEstimate& estimate);
Json three_item_diagnostics_to_json(const TripleEstimateResult& result);
Json error_to_json(const Error& error);
Json family_to_json(const EquivalenceFamily& family);
Json lowerbound_to_json(const LowerBoundPair& pair);
Json report_to_json(const ExperimentReport& report);
Json welfare_to_json(const std::vector<WelfareMenuReport>& reports);

void write_reports_csv(std::ostream& out, const std::vector<ExperimentReport>& reports);
// Dense matrix, one row per line, shortest round-trip decimal form.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace corrprobit
