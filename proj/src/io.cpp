#include "fbr/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string_view>

#include "fbr/errors.hpp"

namespace fbr {

namespace {

[[noreturn]] void fail_parse(const std::string& source, std::size_t line,
                             const std::string& msg) {
  if (line == 0) throw ParseError(source + ": " + msg, 0);
  throw ParseError(source + ":" + std::to_string(line) + ": " + msg, line);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_on(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(trim(line.substr(start)));
      return fields;
    }
    fields.emplace_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::int64_t parse_i64(std::string_view text, const std::string& source, std::size_t line,
                       const std::string& what) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail_parse(source, line, what + ": expected an integer, got '" + std::string(text) + "'");
  return value;
}

double parse_f64(std::string_view text, const std::string& source, std::size_t line,
                 const std::string& what) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail_parse(source, line, what + ": expected a number, got '" + std::string(text) + "'");
  return value;
}

// Yields non-blank, non-comment lines with their 1-based numbers.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line, std::size_t& number) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      const std::string_view view = trim(raw);
      if (view.empty() || view.front() == '#') continue;
      line.assign(view);
      number = line_;
      return true;
    }
    return false;
  }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace

std::string fmt(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::vector<Report> parse_reports(std::istream& in, const std::string& source) {
  std::vector<Report> reports;
  std::set<NodeId> closed;

  bool in_block = false;
  NodeId current{};
  std::size_t block_line = 0;
  std::map<std::int64_t, NodeId> positions;
  std::set<NodeId> unknown;
  std::set<NodeId> subjects;

  auto finalize = [&] {
    if (!in_block) return;
    Report report;
    report.ranker = current;
    const auto m = static_cast<std::int64_t>(positions.size());
    if (!positions.empty() &&
        (positions.begin()->first != 1 || positions.rbegin()->first != m))
      fail_parse(source, block_line,
                 "report by node " + to_string(current) +
                     ": rank positions must be 1.." + std::to_string(m) +
                     " with no gaps");
    for (const auto& [pos, node] : positions) report.ranking.push_back(node);
    report.unknown = unknown;
    reports.push_back(std::move(report));
    closed.insert(current);
    in_block = false;
    positions.clear();
    unknown.clear();
    subjects.clear();
  };

  LineReader reader(in);
  std::string line;
  std::size_t number = 0;
  bool first = true;
  while (reader.next(line, number)) {
    const std::vector<std::string> fields = split_on(line, ',');
    if (first) {
      first = false;
      if (fields.size() == 3 && fields[0] == "ranker" && fields[1] == "rank_position" &&
          fields[2] == "ranked_node")
        continue;
    }
    if (fields.size() != 3)
      fail_parse(source, number, "expected 3 fields `ranker,rank_position,ranked_node`");

    const NodeId ranker{parse_i64(fields[0], source, number, "ranker")};
    if (in_block && !(ranker == current)) finalize();
    if (!in_block) {
      if (closed.contains(ranker))
        fail_parse(source, number,
                   "duplicate report for ranker " + to_string(ranker) +
                       " (rows for one ranker must be contiguous)");
      in_block = true;
      current = ranker;
      block_line = number;
    }

    const NodeId subject{parse_i64(fields[2], source, number, "ranked_node")};
    if (!subjects.insert(subject).second)
      fail_parse(source, number,
                 "node " + to_string(subject) + " listed twice in report by node " +
                     to_string(ranker));
    if (fields[1] == "?") {
      unknown.insert(subject);
    } else {
      const std::int64_t pos = parse_i64(fields[1], source, number, "rank_position");
      if (pos < 1) fail_parse(source, number, "rank_position must be 1 or greater");
      if (!positions.emplace(pos, subject).second)
        fail_parse(source, number,
                   "duplicate rank_position " + std::to_string(pos) +
                       " in report by node " + to_string(ranker));
    }
  }
  finalize();
  return reports;
}

std::vector<Report> load_reports(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_reports(in, path);
}

void save_reports(const std::string& path, const std::vector<Report>& reports) {
  std::vector<const Report*> ordered;
  ordered.reserve(reports.size());
  for (const Report& report : reports) ordered.push_back(&report);
  std::sort(ordered.begin(), ordered.end(),
            [](const Report* a, const Report* b) { return a->ranker < b->ranker; });

  std::ofstream out = open_output(path);
  out << "ranker,rank_position,ranked_node\n";
  for (const Report* report : ordered) {
    for (std::size_t i = 0; i < report->ranking.size(); ++i)
      out << to_string(report->ranker) << ',' << (i + 1) << ','
          << to_string(report->ranking[i]) << '\n';
    for (const NodeId node : report->unknown)
      out << to_string(report->ranker) << ",?," << to_string(node) << '\n';
  }
  finish_output(out, path);
}

SocialNetwork parse_network(std::istream& in, const std::string& source) {
  std::set<NodeId> nodes;
  std::vector<std::pair<NodeId, NodeId>> edges;

  LineReader reader(in);
  std::string line;
  std::size_t number = 0;
  bool first = true;
  while (reader.next(line, number)) {
    const std::vector<std::string> fields = split_on(line, ',');
    if (first) {
      first = false;
      if (fields.size() == 2 && fields[0] == "node_a" && fields[1] == "node_b") continue;
    }
    if (fields.size() == 1) {
      nodes.insert(NodeId{parse_i64(fields[0], source, number, "node")});
      continue;
    }
    if (fields.size() != 2)
      fail_parse(source, number, "expected `node_a,node_b` or a single isolated node");
    const NodeId a{parse_i64(fields[0], source, number, "node_a")};
    const NodeId b{parse_i64(fields[1], source, number, "node_b")};
    if (a == b)
      fail_parse(source, number, "self-loop on node " + to_string(a) + " is not allowed");
    nodes.insert(a);
    nodes.insert(b);
    edges.emplace_back(a, b);
  }
  return SocialNetwork(std::vector<NodeId>(nodes.begin(), nodes.end()), edges);
}

SocialNetwork load_network(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_network(in, path);
}

ScoreFile make_score_file(const RankingGraph& graph, const HodgeResult& full,
                          const LeaveOneOutScores& loo) {
  ScoreFile file;
  file.node_count = graph.nodes().size();
  file.edge_count = graph.edge_count();
  file.cycle_ratio = full.cycle_ratio;
  file.components = full.components;
  file.unscored = loo.unscored;
  for (const NodeId node : graph.nodes()) {
    ScoreFileRow row;
    row.node = node;
    row.full = full.scores.at(node);
    row.loo = loo.scores.at(node);
    row.loo_cycle_ratio = loo.cycle_ratio.at(node);
    file.rows.push_back(row);
  }
  for (const auto& [key, edge] : graph.edges()) {
    ScoreFileResidual res;
    res.a = key.first;
    res.b = key.second;
    res.weight = edge.weight;
    res.count = edge.count;
    res.residual = full.residuals.at(key);
    file.residuals.push_back(res);
  }
  return file;
}

void save_scores(const std::string& path, const ScoreFile& file) {
  std::ofstream out = open_output(path);
  out << "fbr-scores v1\n";
  out << "nodes " << file.node_count << '\n';
  out << "edges " << file.edge_count << '\n';
  out << "cycle_ratio "
      << (file.cycle_ratio ? fmt(*file.cycle_ratio) : std::string("undefined")) << '\n';
  for (const auto& component : file.components) {
    out << "component";
    for (const NodeId node : component) out << ' ' << to_string(node);
    out << '\n';
  }
  out << "unscored";
  for (const NodeId node : file.unscored) out << ' ' << to_string(node);
  out << '\n';
  out << "scores " << file.rows.size() << '\n';
  out << "# node full loo loo_cycle_ratio\n";
  for (const ScoreFileRow& row : file.rows) {
    out << to_string(row.node) << ' ' << fmt(row.full) << ' ' << fmt(row.loo) << ' '
        << (row.loo_cycle_ratio ? fmt(*row.loo_cycle_ratio) : std::string("undefined"))
        << '\n';
  }
  out << "residuals " << file.residuals.size() << '\n';
  out << "# node_a node_b weight count residual\n";
  for (const ScoreFileResidual& res : file.residuals) {
    out << to_string(res.a) << ' ' << to_string(res.b) << ' ' << fmt(res.weight) << ' '
        << res.count << ' ' << fmt(res.residual) << '\n';
  }
  out << "end\n";
  finish_output(out, path);
}

ScoreFile load_scores(const std::string& path) {
  std::ifstream in = open_input(path);
  LineReader reader(in);
  std::string line;
  std::size_t number = 0;

  auto next_line = [&](const std::string& expected) -> std::vector<std::string> {
    if (!reader.next(line, number))
      fail_parse(path, 0, "unexpected end of file; expected " + expected);
    return split_ws(line);
  };

  std::vector<std::string> tokens = next_line("`fbr-scores v1`");
  if (tokens != std::vector<std::string>{"fbr-scores", "v1"})
    fail_parse(path, number, "expected header `fbr-scores v1`");

  ScoreFile file;
  tokens = next_line("`nodes <count>`");
  if (tokens.size() != 2 || tokens[0] != "nodes")
    fail_parse(path, number, "expected `nodes <count>`");
  file.node_count = static_cast<std::size_t>(parse_i64(tokens[1], path, number, "nodes"));

  tokens = next_line("`edges <count>`");
  if (tokens.size() != 2 || tokens[0] != "edges")
    fail_parse(path, number, "expected `edges <count>`");
  file.edge_count = static_cast<std::size_t>(parse_i64(tokens[1], path, number, "edges"));

  tokens = next_line("`cycle_ratio <value|undefined>`");
  if (tokens.size() != 2 || tokens[0] != "cycle_ratio")
    fail_parse(path, number, "expected `cycle_ratio <value|undefined>`");
  if (tokens[1] != "undefined")
    file.cycle_ratio = parse_f64(tokens[1], path, number, "cycle_ratio");

  // Component lines, then the single unscored line.
  while (true) {
    tokens = next_line("`component ...` or `unscored ...`");
    if (tokens[0] == "component") {
      std::vector<NodeId> component;
      for (std::size_t i = 1; i < tokens.size(); ++i)
        component.push_back(NodeId{parse_i64(tokens[i], path, number, "component node")});
      if (component.empty()) fail_parse(path, number, "component line lists no nodes");
      file.components.push_back(std::move(component));
      continue;
    }
    if (tokens[0] == "unscored") {
      for (std::size_t i = 1; i < tokens.size(); ++i)
        file.unscored.insert(NodeId{parse_i64(tokens[i], path, number, "unscored node")});
      break;
    }
    fail_parse(path, number, "expected `component ...` or `unscored ...`");
  }

  tokens = next_line("`scores <count>`");
  if (tokens.size() != 2 || tokens[0] != "scores")
    fail_parse(path, number, "expected `scores <count>`");
  const auto row_count = static_cast<std::size_t>(parse_i64(tokens[1], path, number, "scores"));
  for (std::size_t i = 0; i < row_count; ++i) {
    tokens = next_line("a score row `node full loo loo_cycle_ratio`");
    if (tokens.size() != 4) fail_parse(path, number, "expected `node full loo loo_cycle_ratio`");
    ScoreFileRow row;
    row.node = NodeId{parse_i64(tokens[0], path, number, "node")};
    row.full = parse_f64(tokens[1], path, number, "full score");
    row.loo = parse_f64(tokens[2], path, number, "leave-one-out score");
    if (tokens[3] != "undefined")
      row.loo_cycle_ratio = parse_f64(tokens[3], path, number, "loo_cycle_ratio");
    file.rows.push_back(row);
  }

  tokens = next_line("`residuals <count>`");
  if (tokens.size() != 2 || tokens[0] != "residuals")
    fail_parse(path, number, "expected `residuals <count>`");
  const auto res_count =
      static_cast<std::size_t>(parse_i64(tokens[1], path, number, "residuals"));
  for (std::size_t i = 0; i < res_count; ++i) {
    tokens = next_line("a residual row `node_a node_b weight count residual`");
    if (tokens.size() != 5)
      fail_parse(path, number, "expected `node_a node_b weight count residual`");
    ScoreFileResidual res;
    res.a = NodeId{parse_i64(tokens[0], path, number, "node_a")};
    res.b = NodeId{parse_i64(tokens[1], path, number, "node_b")};
    res.weight = parse_f64(tokens[2], path, number, "weight");
    res.count = static_cast<int>(parse_i64(tokens[3], path, number, "count"));
    res.residual = parse_f64(tokens[4], path, number, "residual");
    file.residuals.push_back(res);
  }

  tokens = next_line("`end`");
  if (tokens != std::vector<std::string>{"end"}) fail_parse(path, number, "expected `end`");
  return file;
}

void write_json(const std::string& path, const nlohmann::json& value) {
  std::ofstream out = open_output(path);
  out << value.dump(1, ' ') << '\n';
  finish_output(out, path);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

namespace {

// Schema helpers: structural problems -> ParseError naming the field path;
// value-range problems surface as ValidationError from the factories.

const nlohmann::json& need_field(const nlohmann::json& obj, const std::string& path,
                                 const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError("config: " + path + (path.empty() ? "" : ".") + key + ": missing", 0);
  return *it;
}

std::string join_path(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

double need_num(const nlohmann::json& obj, const std::string& path, const char* key) {
  const nlohmann::json& v = need_field(obj, path, key);
  if (!v.is_number())
    throw ParseError("config: " + join_path(path, key) + ": expected a number", 0);
  return v.get<double>();
}

int need_int(const nlohmann::json& obj, const std::string& path, const char* key) {
  const nlohmann::json& v = need_field(obj, path, key);
  if (!v.is_number_integer())
    throw ParseError("config: " + join_path(path, key) + ": expected an integer", 0);
  return v.get<int>();
}

std::string need_str(const nlohmann::json& obj, const std::string& path, const char* key) {
  const nlohmann::json& v = need_field(obj, path, key);
  if (!v.is_string())
    throw ParseError("config: " + join_path(path, key) + ": expected a string", 0);
  return v.get<std::string>();
}

void check_keys(const nlohmann::json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ParseError("config: " + (path.empty() ? std::string("top level") : path) +
                         ": expected an object",
                     0);
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* name : allowed)
      if (key == name) {
        known = true;
        break;
      }
    if (!known)
      throw ParseError("config: " + (path.empty() ? key : path + "." + key) +
                           ": unknown field",
                       0);
  }
}

template <class Fn>
auto with_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError("config: " + path + ": " + e.what());
  }
}

NetworkModel parse_network_model(const nlohmann::json& obj, const std::string& path) {
  const std::string kind = need_str(obj, path, "kind");
  if (kind == "erdos_renyi") {
    check_keys(obj, path, {"kind", "n", "p"});
    const int n = need_int(obj, path, "n");
    const double p = need_num(obj, path, "p");
    return with_path(path, [&] { return NetworkModel::erdos_renyi(n, p); });
  }
  if (kind == "ring") {
    check_keys(obj, path, {"kind", "n", "k", "beta"});
    const int n = need_int(obj, path, "n");
    const int k = need_int(obj, path, "k");
    const double beta = need_num(obj, path, "beta");
    return with_path(path, [&] { return NetworkModel::ring_lattice_rewire(n, k, beta); });
  }
  if (kind == "geometric") {
    check_keys(obj, path, {"kind", "n", "radius"});
    const int n = need_int(obj, path, "n");
    const double radius = need_num(obj, path, "radius");
    return with_path(path, [&] { return NetworkModel::geometric(n, radius); });
  }
  throw ParseError("config: " + join_path(path, "kind") + ": unknown network model '" +
                       kind + "' (expected erdos_renyi, ring, or geometric)",
                   0);
}

NoiseModel parse_noise_model(const nlohmann::json& obj, const std::string& path) {
  const std::string kind = need_str(obj, path, "kind");
  if (kind == "exact") {
    check_keys(obj, path, {"kind"});
    return NoiseModel::exact();
  }
  if (kind == "flip_constant") {
    check_keys(obj, path, {"kind", "p"});
    const double p = need_num(obj, path, "p");
    return with_path(path, [&] { return NoiseModel::flip_constant(p); });
  }
  if (kind == "flip_logistic") {
    check_keys(obj, path, {"kind", "scale"});
    const double scale = need_num(obj, path, "scale");
    return with_path(path, [&] { return NoiseModel::flip_logistic(scale); });
  }
  throw ParseError("config: " + join_path(path, "kind") + ": unknown noise model '" + kind +
                       "' (expected exact, flip_constant, or flip_logistic)",
                   0);
}

MechanismConfig parse_mechanism(const nlohmann::json& obj, const std::string& path) {
  const std::string mode = need_str(obj, path, "mode");
  if (mode == "threshold") {
    check_keys(obj, path, {"mode", "cutoff"});
    return MechanismConfig::threshold(need_num(obj, path, "cutoff"));
  }
  if (mode == "quota") {
    check_keys(obj, path, {"mode", "alpha", "tie_policy", "seed"});
    const double alpha = need_num(obj, path, "alpha");
    TiePolicy policy = TiePolicy::kIncludeAllTies;
    if (obj.contains("tie_policy")) {
      const std::string name = need_str(obj, path, "tie_policy");
      if (name == "include_all")
        policy = TiePolicy::kIncludeAllTies;
      else if (name == "exclude_all")
        policy = TiePolicy::kExcludeAllTies;
      else if (name == "seeded_random")
        policy = TiePolicy::kSeededUniformRandom;
      else
        throw ParseError("config: " + join_path(path, "tie_policy") +
                             ": unknown tie policy '" + name +
                             "' (expected include_all, exclude_all, or seeded_random)",
                         0);
    }
    std::uint64_t seed = 0;
    if (obj.contains("seed")) {
      const nlohmann::json& v = obj["seed"];
      if (!v.is_number_unsigned() && !v.is_number_integer())
        throw ParseError("config: " + join_path(path, "seed") + ": expected an integer", 0);
      seed = v.get<std::uint64_t>();
    }
    return with_path(path, [&] { return MechanismConfig::quota(alpha, policy, seed); });
  }
  throw ParseError("config: " + join_path(path, "mode") + ": unknown mechanism mode '" +
                       mode + "' (expected threshold or quota)",
                   0);
}

std::vector<std::uint64_t> parse_seeds(const nlohmann::json& value) {
  std::vector<std::uint64_t> seeds;
  if (value.is_array()) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      const nlohmann::json& v = value[i];
      if (!v.is_number_unsigned() && !v.is_number_integer())
        throw ParseError("config: seeds[" + std::to_string(i) + "]: expected an integer", 0);
      seeds.push_back(v.get<std::uint64_t>());
    }
  } else if (value.is_object()) {
    check_keys(value, "seeds", {"start", "count"});
    const nlohmann::json& start_v = need_field(value, "seeds", "start");
    const nlohmann::json& count_v = need_field(value, "seeds", "count");
    if (!start_v.is_number_integer() && !start_v.is_number_unsigned())
      throw ParseError("config: seeds.start: expected an integer", 0);
    if (!count_v.is_number_integer() && !count_v.is_number_unsigned())
      throw ParseError("config: seeds.count: expected an integer", 0);
    const auto start = start_v.get<std::uint64_t>();
    const auto count = count_v.get<std::int64_t>();
    if (count < 0) throw ParseError("config: seeds.count: must be nonnegative", 0);
    for (std::int64_t i = 0; i < count; ++i)
      seeds.push_back(start + static_cast<std::uint64_t>(i));
  } else {
    throw ParseError("config: seeds: expected an array or {start, count}", 0);
  }
  if (seeds.empty()) throw UsageError("config: seeds: need at least one seed");
  return seeds;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  const nlohmann::json root = read_json(path);
  check_keys(root, "",
             {"networks", "theta", "theta_bar_quantile", "noise", "coverage", "mechanism",
              "calibrate_fraction", "baseline_quota", "seeds", "threads"});

  ExperimentConfig config;

  const nlohmann::json& networks = need_field(root, "", "networks");
  if (!networks.is_array() || networks.empty())
    throw ParseError("config: networks: expected a nonempty array", 0);
  for (std::size_t i = 0; i < networks.size(); ++i)
    config.networks.push_back(
        parse_network_model(networks[i], "networks[" + std::to_string(i) + "]"));

  if (root.contains("theta")) {
    const nlohmann::json& theta = root["theta"];
    check_keys(theta, "theta", {"mean", "stddev"});
    if (theta.contains("mean")) config.theta.mean = need_num(theta, "theta", "mean");
    if (theta.contains("stddev")) config.theta.stddev = need_num(theta, "theta", "stddev");
  }
  if (root.contains("theta_bar_quantile"))
    config.theta_bar_quantile = need_num(root, "", "theta_bar_quantile");
  if (root.contains("noise")) config.noise = parse_noise_model(root["noise"], "noise");
  if (root.contains("coverage")) config.coverage = need_num(root, "", "coverage");

  config.mechanism.config = parse_mechanism(need_field(root, "", "mechanism"), "mechanism");
  if (root.contains("calibrate_fraction"))
    config.mechanism.calibrate_fraction = need_num(root, "", "calibrate_fraction");
  if (root.contains("baseline_quota"))
    config.baseline_quota = need_num(root, "", "baseline_quota");

  config.seeds = parse_seeds(need_field(root, "", "seeds"));
  if (root.contains("threads")) config.threads = need_int(root, "", "threads");
  return config;
}

namespace {

std::string csv_quote(const std::string& text) {
  std::string quoted = "\"";
  for (const char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string opt_fmt(const std::optional<double>& value) {
  return value ? fmt(*value) : std::string();
}

struct Histogram {
  double lo = 0, width = 1;
  static constexpr int kBins = 20;

  std::size_t bin(double value) const {
    const double raw = (value - lo) / width;
    auto index = static_cast<std::ptrdiff_t>(raw);
    index = std::clamp<std::ptrdiff_t>(index, 0, kBins - 1);
    return static_cast<std::size_t>(index);
  }
  double edge(int i) const { return lo + width * i; }
};

}  // namespace

void write_runs_csv(const std::string& path, const ExperimentResult& result,
                    const std::vector<NetworkModel>& models) {
  std::ofstream out = open_output(path);
  out << "run_id,model_index,model,seed,nodes,density,cycle_ratio,scored,unscored,"
         "targeted,tp,fp,fn,tn,targeted_theta_median,excluded_theta_median,"
         "baseline_targeted,baseline_tp,baseline_fp,baseline_fn,baseline_tn,"
         "baseline_targeted_theta_median,baseline_excluded_theta_median\n";
  for (const RunRecord& run : result.runs) {
    const std::size_t nodes = run.community.network.node_count();
    out << run.run_id << ',' << run.model_index << ','
        << csv_quote(models.at(static_cast<std::size_t>(run.model_index)).describe()) << ','
        << run.seed << ',' << nodes << ',' << fmt(run.density) << ','
        << opt_fmt(run.cycle_ratio) << ',' << (nodes - run.outcome.unscored.size()) << ','
        << run.outcome.unscored.size() << ',' << run.outcome.targeted.size() << ','
        << run.eval.true_positives << ',' << run.eval.false_positives << ','
        << run.eval.false_negatives << ',' << run.eval.true_negatives << ','
        << (run.eval.targeted_theta ? fmt(run.eval.targeted_theta->median) : std::string())
        << ','
        << (run.eval.excluded_theta ? fmt(run.eval.excluded_theta->median) : std::string());
    if (run.baseline_eval) {
      const EvalReport& base = *run.baseline_eval;
      out << ',' << run.baseline_outcome->targeted.size() << ',' << base.true_positives
          << ',' << base.false_positives << ',' << base.false_negatives << ','
          << base.true_negatives << ','
          << (base.targeted_theta ? fmt(base.targeted_theta->median) : std::string()) << ','
          << (base.excluded_theta ? fmt(base.excluded_theta->median) : std::string());
    } else {
      out << ",,,,,,,";
    }
    out << '\n';
  }
  finish_output(out, path);
}

void write_theta_hist_csv(const std::string& path, const ExperimentResult& result) {
  // Pool theta values by arm and membership; shared bins over the full range.
  std::vector<double> friend_in, friend_out, base_in, base_out;
  for (const RunRecord& run : result.runs) {
    for (const NodeId node : run.community.network.nodes()) {
      const double theta = run.community.theta.at(node);
      if (!run.outcome.unscored.contains(node))
        (run.outcome.targeted.contains(node) ? friend_in : friend_out).push_back(theta);
      if (run.baseline_outcome)
        (run.baseline_outcome->targeted.contains(node) ? base_in : base_out).push_back(theta);
    }
  }

  std::ofstream out = open_output(path);
  out << "bin_lo,bin_hi,friend_targeted,friend_excluded,baseline_targeted,"
         "baseline_excluded\n";

  std::vector<double> all;
  for (const auto* v : {&friend_in, &friend_out, &base_in, &base_out})
    all.insert(all.end(), v->begin(), v->end());
  if (all.empty()) {
    finish_output(out, path);
    return;
  }
  const auto [lo_it, hi_it] = std::minmax_element(all.begin(), all.end());
  Histogram hist;
  hist.lo = *lo_it;
  hist.width = (*hi_it - *lo_it) / Histogram::kBins;
  if (hist.width <= 0.0) hist.width = 1.0;

  std::size_t counts[4][Histogram::kBins] = {};
  const std::vector<double>* series[4] = {&friend_in, &friend_out, &base_in, &base_out};
  for (int s = 0; s < 4; ++s)
    for (const double value : *series[s]) ++counts[s][hist.bin(value)];

  for (int b = 0; b < Histogram::kBins; ++b) {
    out << fmt(hist.edge(b)) << ',' << fmt(hist.edge(b + 1));
    for (int s = 0; s < 4; ++s) out << ',' << counts[s][b];
    out << '\n';
  }
  finish_output(out, path);
}

void write_cycle_hist_csv(const std::string& path, const ExperimentResult& result) {
  Histogram hist;
  hist.lo = 0.0;
  hist.width = 1.0 / Histogram::kBins;
  std::size_t counts[Histogram::kBins] = {};
  for (const RunRecord& run : result.runs)
    if (run.cycle_ratio) ++counts[hist.bin(*run.cycle_ratio)];

  std::ofstream out = open_output(path);
  out << "bin_lo,bin_hi,count\n";
  for (int b = 0; b < Histogram::kBins; ++b)
    out << fmt(hist.edge(b)) << ',' << fmt(hist.edge(b + 1)) << ',' << counts[b] << '\n';
  finish_output(out, path);
}

nlohmann::json experiment_summary(const ExperimentConfig& config,
                                  const ExperimentResult& result) {
  nlohmann::json summary;
  summary["artifact_version"] = kArtifactVersion;
  summary["runs"] = result.runs.size();

  double density_sum = 0.0;
  std::vector<std::pair<double, double>> cycle_density;  // (cycle ratio, density)
  for (const RunRecord& run : result.runs) {
    density_sum += run.density;
    if (run.cycle_ratio) cycle_density.emplace_back(*run.cycle_ratio, run.density);
  }
  const double overall_mean_density =
      result.runs.empty() ? 0.0 : density_sum / static_cast<double>(result.runs.size());
  summary["overall_mean_density"] = overall_mean_density;

  if (!cycle_density.empty()) {
    double ratio_sum = 0.0;
    for (const auto& [ratio, density] : cycle_density) ratio_sum += ratio;
    summary["mean_cycle_ratio"] = ratio_sum / static_cast<double>(cycle_density.size());

    // Density among the top-decile cycle-ratio runs; the qualitative claim is
    // that inconsistency outliers concentrate in sparse networks.
    std::sort(cycle_density.begin(), cycle_density.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t decile = std::max<std::size_t>(1, cycle_density.size() / 10);
    double top_sum = 0.0;
    for (std::size_t i = 0; i < decile; ++i) top_sum += cycle_density[i].second;
    summary["top_decile_cycle_mean_density"] = top_sum / static_cast<double>(decile);
  }

  auto arm_stats = [](auto&& eval_of) {
    nlohmann::json arm;
    double precision_sum = 0, recall_sum = 0;
    std::size_t precision_n = 0, recall_n = 0;
    for (const auto& eval : eval_of) {
      const double tp = static_cast<double>(eval.true_positives);
      if (eval.true_positives + eval.false_positives > 0) {
        precision_sum += tp / static_cast<double>(eval.true_positives + eval.false_positives);
        ++precision_n;
      }
      if (eval.true_positives + eval.false_negatives > 0) {
        recall_sum += tp / static_cast<double>(eval.true_positives + eval.false_negatives);
        ++recall_n;
      }
    }
    if (precision_n) arm["mean_precision"] = precision_sum / static_cast<double>(precision_n);
    if (recall_n) arm["mean_recall"] = recall_sum / static_cast<double>(recall_n);
    return arm;
  };

  std::vector<EvalReport> friend_evals, baseline_evals;
  for (const RunRecord& run : result.runs) {
    friend_evals.push_back(run.eval);
    if (run.baseline_eval) baseline_evals.push_back(*run.baseline_eval);
  }
  summary["friend_based"] = arm_stats(friend_evals);
  if (!baseline_evals.empty()) summary["community_baseline"] = arm_stats(baseline_evals);

  nlohmann::json mech;
  if (config.mechanism.config.mode == MechanismConfig::Mode::kThreshold) {
    mech["mode"] = "threshold";
    mech["cutoff"] = config.mechanism.config.cutoff;
  } else {
    mech["mode"] = "quota";
    mech["alpha"] = config.mechanism.config.alpha;
    switch (config.mechanism.config.tie_policy) {
      case TiePolicy::kIncludeAllTies: mech["tie_policy"] = "include_all"; break;
      case TiePolicy::kExcludeAllTies: mech["tie_policy"] = "exclude_all"; break;
      case TiePolicy::kSeededUniformRandom: mech["tie_policy"] = "seeded_random"; break;
    }
    mech["seed"] = config.mechanism.config.seed;
  }
  summary["mechanism"] = mech;

  if (result.calibrated_cutoff) {
    summary["calibrated_cutoff"] = *result.calibrated_cutoff;
    // A cutoff fitted to hit a target fraction behaves like a quota: reports
    // can move the fitted value, so the strategy-proofness argument for a
    // fixed cutoff no longer applies.
    summary["calibration_reintroduces_quota_manipulability"] = true;
  }
  summary["coverage"] = config.coverage;
  summary["theta_bar_quantile"] = config.theta_bar_quantile;
  return summary;
}

}  // namespace fbr
