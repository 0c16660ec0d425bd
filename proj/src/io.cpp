#include "agentprm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ctime>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/core.h>
#include <json.hpp>

#include "agentprm/error.hpp"

namespace agentprm {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Data, fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, fmt::format("cannot read '{}'", path.string()));
  return in;
}

std::string next_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw Error(ErrorKind::Data, fmt::format("checkpoint truncated before {}", what));
  return tok;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::Data, fmt::format("bad number '{}' in checkpoint", s));
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorKind::Data, fmt::format("bad integer '{}' in checkpoint", s));
  }
  return v;
}

void expect(std::istream& in, const std::string& word) {
  auto tok = next_token(in, word.c_str());
  if (tok != word) {
    throw Error(ErrorKind::Data, fmt::format("checkpoint expected '{}', found '{}'", word, tok));
  }
}

void read_header(std::istream& in, const std::string& kind) {
  expect(in, "agentprm-checkpoint");
  auto version = parse_u64(next_token(in, "version"));
  if (version != static_cast<std::uint64_t>(kCheckpointVersion)) {
    throw Error(ErrorKind::Data, fmt::format("unsupported checkpoint version {}", version));
  }
  expect(in, "kind");
  auto k = next_token(in, "kind");
  if (k != kind) throw Error(ErrorKind::Data, fmt::format("checkpoint holds a {}, not a {}", k, kind));
}

template <typename Map>
std::vector<std::uint64_t> sorted_keys(const Map& m) {
  std::vector<std::uint64_t> keys;
  keys.reserve(m.size());
  for (const auto& kv : m) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

void write_policy(const Policy& policy, std::ostream& out) {
  out << fmt::format("agentprm-checkpoint {}\nkind policy\n", kCheckpointVersion);
  out << fmt::format("mode {}\nactions {}\ntemperature {}\n",
                     policy.mode == PolicyMode::Tabular ? "tabular" : "linear", policy.num_actions,
                     policy.temperature);
  if (policy.mode == PolicyMode::Tabular) {
    out << fmt::format("rows {}\n", policy.table.size());
    for (auto key : sorted_keys(policy.table)) {
      out << key;
      for (double v : policy.table.at(key)) out << ' ' << fmt::format("{}", v);
      out << '\n';
    }
  } else {
    out << fmt::format("features {}\nweights {}\n", policy.feature_dim, policy.weights.size());
    for (double w : policy.weights) out << fmt::format("{}\n", w);
  }
}

Policy read_policy(std::istream& in) {
  read_header(in, "policy");
  expect(in, "mode");
  auto mode = next_token(in, "mode");
  expect(in, "actions");
  int actions = static_cast<int>(parse_u64(next_token(in, "actions")));
  expect(in, "temperature");
  double temperature = parse_double(next_token(in, "temperature"));
  if (mode == "tabular") {
    Policy p = Policy::tabular(actions, temperature);
    expect(in, "rows");
    auto rows = parse_u64(next_token(in, "rows"));
    for (std::uint64_t r = 0; r < rows; ++r) {
      auto key = parse_u64(next_token(in, "row key"));
      std::vector<double> row(static_cast<std::size_t>(actions));
      for (auto& v : row) v = parse_double(next_token(in, "logit"));
      p.table.emplace(key, std::move(row));
    }
    return p;
  }
  if (mode != "linear") throw Error(ErrorKind::Data, fmt::format("unknown policy mode '{}'", mode));
  expect(in, "features");
  auto features = parse_u64(next_token(in, "features"));
  Policy p = Policy::linear(actions, features, temperature);
  expect(in, "weights");
  auto n = parse_u64(next_token(in, "weights"));
  if (n != p.weights.size()) throw Error(ErrorKind::Data, "policy weight count mismatch");
  for (auto& w : p.weights) w = parse_double(next_token(in, "weight"));
  return p;
}

void write_model(const RewardModel& model, std::ostream& out) {
  out << fmt::format("agentprm-checkpoint {}\nkind reward-model\n", kCheckpointVersion);
  out << fmt::format("variant {}\nbackend {}\n", to_string(model.variant()),
                     to_string(model.backend()));
  if (model.backend() == Backend::Tabular) {
    out << fmt::format("entries {}\n", model.table().size());
    for (auto key : sorted_keys(model.table())) {
      out << fmt::format("{} {}\n", key, model.table().at(key));
    }
  } else {
    out << fmt::format("input {}\nhidden {}\nparameters {}\n", model.input_size(),
                       model.hidden_size(), model.parameters().size());
    for (double w : model.parameters()) out << fmt::format("{}\n", w);
  }
}

RewardModel read_model(std::istream& in) {
  read_header(in, "reward-model");
  expect(in, "variant");
  auto variant = parse_variant(next_token(in, "variant"));
  expect(in, "backend");
  auto backend = parse_backend(next_token(in, "backend"));
  if (backend == Backend::Tabular) {
    auto m = RewardModel::tabular(variant);
    expect(in, "entries");
    auto n = parse_u64(next_token(in, "entries"));
    for (std::uint64_t i = 0; i < n; ++i) {
      auto key = parse_u64(next_token(in, "entry key"));
      m.table()[key] = parse_double(next_token(in, "entry value"));
    }
    return m;
  }
  expect(in, "input");
  auto input = parse_u64(next_token(in, "input"));
  expect(in, "hidden");
  auto hidden = parse_u64(next_token(in, "hidden"));
  expect(in, "parameters");
  auto n = parse_u64(next_token(in, "parameters"));
  std::vector<double> params(n);
  for (auto& w : params) w = parse_double(next_token(in, "parameter"));
  return RewardModel::mlp_from_parameters(variant, input, hidden, std::move(params));
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_policy(policy, out);
}

Policy load_policy(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_policy(in);
}

void save_model(const RewardModel& model, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_model(model, out);
}

RewardModel load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_model(in);
}

void save_trajectories(std::span<const Trajectory> trajectories, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& t : trajectories) {
    const EnvState& first = t.steps.empty() ? t.final_state : t.steps.front().state;
    json observations = json::array({first.observations.front()});
    for (const auto& s : t.steps) observations.push_back(s.observation.payload);
    json j = {{"task", t.task.id},       {"horizon", t.task.horizon},
              {"seed", t.seed},          {"actions", t.action_ids()},
              {"observations", observations}, {"outcome", t.outcome}};
    out << j.dump() << '\n';
  }
}

std::vector<Trajectory> load_trajectories(const Environment& env, const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      auto task = env.parse_task(j.at("task").get<std::string>(), j.at("horizon").get<int>());
      auto actions = j.at("actions").get<std::vector<int>>();
      auto observations = j.at("observations").get<std::vector<std::string>>();
      auto t = replay(env, task, j.at("seed").get<std::uint64_t>(), actions, observations);
      if (t.outcome != j.at("outcome").get<double>()) {
        throw Error(ErrorKind::Data, "recorded outcome disagrees with the replay");
      }
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Data, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

void save_labels(std::span<const LabeledStep> labels, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& l : labels) {
    json j = {{"trajectory", l.trajectory}, {"step", l.step_index}, {"q_target", l.q_target},
              {"adv_target", l.adv_target}, {"source", std::string(to_string(l.source))}};
    out << j.dump() << '\n';
  }
}

std::vector<LabeledStep> load_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<LabeledStep> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      out.push_back(LabeledStep{j.at("trajectory").get<std::size_t>(), j.at("step").get<int>(),
                                j.at("q_target").get<double>(), j.at("adv_target").get<double>(),
                                parse_label_source(j.at("source").get<std::string>())});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Data, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

void save_task_manifest(std::span<const Task> tasks, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "id\tinstruction\thorizon\n";
  for (const auto& t : tasks) out << fmt::format("{}\t{}\t{}\n", t.id, t.instruction, t.horizon);
}

std::vector<Task> load_task_manifest(const Environment& env, const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Task> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto a = line.find('\t');
    auto b = line.rfind('\t');
    if (a == std::string::npos || a == b) {
      throw Error(ErrorKind::Data, fmt::format("malformed manifest line '{}'", line));
    }
    int horizon = static_cast<int>(parse_u64(line.substr(b + 1)));
    out.push_back(env.parse_task(line.substr(0, a), horizon));
  }
  return out;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path)
    : path_(path), out_(std::make_unique<std::ofstream>(open_out(path))) {
  *out_ << json{{"created", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)))}}
               .dump()
        << '\n';
  *out_ << json{{"schema", {"experiment", "metric", "x", "y", "seed"}}}.dump() << '\n';
}

void MetricsWriter::write(const MetricsRecord& r) {
  auto key = fmt::format("{}\x1f{}\x1f{}\x1f{}", r.experiment, r.metric, r.x, r.seed);
  if (!keys_.insert(key).second) {
    throw Error(ErrorKind::Internal, fmt::format("duplicate metric {} x={} seed={} in {}", r.metric,
                                                 r.x, r.seed, r.experiment));
  }
  json j = {{"experiment", r.experiment}, {"metric", r.metric}, {"x", r.x}, {"y", r.y},
            {"seed", r.seed}};
  *out_ << j.dump() << '\n';
}

void MetricsWriter::flush() { out_->flush(); }

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno <= 2 || line.empty()) continue;
    try {
      auto j = json::parse(line);
      out.push_back(MetricsRecord{j.at("experiment").get<std::string>(),
                                  j.at("metric").get<std::string>(), j.at("x").get<double>(),
                                  j.at("y").get<double>(), j.at("seed").get<std::int64_t>()});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Data, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
}

}  // namespace agentprm
