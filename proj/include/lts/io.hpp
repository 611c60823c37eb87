#pragma once

// Text formats: data CSV, ground-truth JSON and the fit run record.
//
// CSV rows hold d feature values followed by y, comma separated; lines
// starting with '#' and blank lines are skipped. Indices in JSON are
// 1-based.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lts/datagen.hpp"
#include "lts/solver.hpp"

namespace lts {

inline constexpr int kRunRecordSchema = 1;
inline constexpr const char* kToolVersion = "1.0.0";

class ParseError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view field, Index line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size() || field.empty())
    throw ParseError("line " + std::to_string(line) + ": cannot parse '" + std::string(field) + "' as a number");
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline IndexSet to_one_based(const IndexSet& s) {
  IndexSet out(s);
  for (Index& i : out) ++i;
  return out;
}

inline IndexSet from_one_based(const IndexSet& s) {
  IndexSet out(s);
  for (Index& i : out) {
    if (i == 0) throw ParseError("index 0 in a 1-based index list");
    --i;
  }
  return out;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline Dataset read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    std::vector<double> row;
    std::size_t pos = 0;
    for (;;) {
      const std::size_t comma = text.find(',', pos);
      row.push_back(detail::parse_double(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos), line_no));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (row.size() < 2) throw ParseError("line " + std::to_string(line_no) + ": need at least one feature and y");
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("line " + std::to_string(line_no) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no data rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  Matrix X(n, d);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rows[static_cast<Index>(i)][static_cast<Index>(j)];
    y(i) = rows[static_cast<Index>(i)][static_cast<Index>(d)];
  }
  try {
    return Dataset(std::move(X), std::move(y));
  } catch (const InvalidSpec& e) {
    throw ParseError(e.what());
  }
}

inline void write_csv(std::ostream& out, const Dataset& data, bool header = true) {
  if (header) {
    out << '#';
    for (Index j = 0; j < data.d(); ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
  }
  for (Index i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Index j = 0; j < data.d(); ++j) out << detail::format_double(data.X()(ii, static_cast<Eigen::Index>(j))) << ',';
    out << detail::format_double(data.y()(ii)) << '\n';
  }
}

/// FNV-1a over n, d and the IEEE bytes of X (row major) then y.
inline std::string dataset_digest(const Dataset& data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      hash ^= (word >> (8 * b)) & 0xffU;
      hash *= 0x100000001b3ULL;
    }
  };
  auto feed_double = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    feed(bits);
  };
  feed(data.n());
  feed(data.d());
  for (Index i = 0; i < data.n(); ++i)
    for (Index j = 0; j < data.d(); ++j) feed_double(data.X()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  for (Index i = 0; i < data.n(); ++i) feed_double(data.y()(static_cast<Eigen::Index>(i)));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return std::string("fnv1a64:") + buf;
}

inline nlohmann::json truth_to_json(const GenSpec& spec, const GroundTruth& truth) {
  return {
      {"n", spec.n},
      {"d", spec.d},
      {"contamination", to_string(spec.contamination)},
      {"n_outliers", spec.n_outliers},
      {"noise_sd", spec.noise_sd},
      {"shift_magnitude", spec.shift_magnitude},
      {"laplace_scale", spec.laplace_scale},
      {"seed", spec.seed},
      {"beta_true", detail::to_std(truth.beta_true)},
      {"outliers", detail::to_one_based(truth.outliers)},
  };
}

/// Resolved configuration, data identity and solver output of one fit.
struct RunRecord {
  int schema_version = kRunRecordSchema;
  std::string tool_version = kToolVersion;
  SolverConfig config;  // resolved: h, q and socp_depth are set
  Index n = 0;
  Index d = 0;
  std::string digest;
  SolveReport report;
};

inline RunRecord make_run_record(const Dataset& data, const SolverConfig& cfg, const SolveReport& report) {
  RunRecord rec;
  rec.config = resolve_config(data, cfg);
  rec.n = data.n();
  rec.d = data.d();
  rec.digest = dataset_digest(data);
  rec.report = report;
  return rec;
}

inline nlohmann::json to_json(const SolveStats& s) {
  return {
      {"nodes_visited", s.nodes_visited},
      {"leaves_visited", s.leaves_visited},
      {"monotone_prunes", s.monotone_prunes},
      {"socp_calls", s.socp_calls},
      {"socp_prunes", s.socp_prunes},
      {"inconsistent_relaxations", s.inconsistent_relaxations},
      {"gap_too_large", s.gap_too_large},
      {"incumbent_updates", s.incumbent_updates},
  };
}

inline nlohmann::json to_json(const RunRecord& rec) {
  const SolverConfig& c = rec.config;
  const SolveReport& r = rec.report;
  return {
      {"schema_version", rec.schema_version},
      {"tool_version", rec.tool_version},
      {"config",
       {
           {"mode", to_string(c.mode)},
           {"h", c.h.value_or(0)},
           {"q", c.q.value_or(0.0)},
           {"socp_leaf_threshold", c.socp_leaf_threshold},
           {"socp_depth", c.socp_depth.value_or(0)},
           {"tol_relax", c.tol_relax},
           {"tol_pi", c.tol_pi},
           {"unsafe_inconsistent_prune", c.unsafe_inconsistent_prune},
           {"max_cstep_iter", c.max_cstep_iter},
           {"bba_csteps", c.bba_csteps},
       }},
      {"dataset", {{"n", rec.n}, {"d", rec.d}, {"digest", rec.digest}}},
      {"report",
       {
           {"beta", detail::to_std(r.beta)},
           {"subset", detail::to_one_based(r.subset)},
           {"objective", r.objective},
           {"pi", r.pi},
           {"stats", to_json(r.stats)},
           {"elapsed_seconds", r.elapsed.count()},
       }},
  };
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  try {
    RunRecord rec;
    rec.schema_version = j.at("schema_version").get<int>();
    if (rec.schema_version != kRunRecordSchema) throw ParseError("unsupported run record schema version");
    rec.tool_version = j.at("tool_version").get<std::string>();
    const auto& c = j.at("config");
    rec.config.mode = parse_mode(c.at("mode").get<std::string>());
    rec.config.h = c.at("h").get<Index>();
    rec.config.q = c.at("q").get<double>();
    rec.config.socp_leaf_threshold = c.at("socp_leaf_threshold").get<std::uint64_t>();
    rec.config.socp_depth = c.at("socp_depth").get<Index>();
    rec.config.tol_relax = c.at("tol_relax").get<double>();
    rec.config.tol_pi = c.at("tol_pi").get<double>();
    rec.config.unsafe_inconsistent_prune = c.at("unsafe_inconsistent_prune").get<bool>();
    rec.config.max_cstep_iter = c.at("max_cstep_iter").get<Index>();
    rec.config.bba_csteps = c.at("bba_csteps").get<bool>();
    const auto& ds = j.at("dataset");
    rec.n = ds.at("n").get<Index>();
    rec.d = ds.at("d").get<Index>();
    rec.digest = ds.at("digest").get<std::string>();
    const auto& r = j.at("report");
    rec.report.mode = rec.config.mode;
    rec.report.h = *rec.config.h;
    rec.report.q = *rec.config.q;
    rec.report.beta = detail::to_eigen(r.at("beta").get<std::vector<double>>());
    rec.report.subset = detail::from_one_based(r.at("subset").get<IndexSet>());
    rec.report.objective = r.at("objective").get<double>();
    rec.report.pi = r.at("pi").get<double>();
    const auto& s = r.at("stats");
    SolveStats& st = rec.report.stats;
    st.nodes_visited = s.at("nodes_visited").get<std::uint64_t>();
    st.leaves_visited = s.at("leaves_visited").get<std::uint64_t>();
    st.monotone_prunes = s.at("monotone_prunes").get<std::uint64_t>();
    st.socp_calls = s.at("socp_calls").get<std::uint64_t>();
    st.socp_prunes = s.at("socp_prunes").get<std::uint64_t>();
    st.inconsistent_relaxations = s.at("inconsistent_relaxations").get<std::uint64_t>();
    st.gap_too_large = s.at("gap_too_large").get<std::uint64_t>();
    st.incumbent_updates = s.at("incumbent_updates").get<std::uint64_t>();
    rec.report.elapsed = std::chrono::duration<double>(r.at("elapsed_seconds").get<double>());
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed run record: ") + e.what());
  }
}

}  // namespace lts
