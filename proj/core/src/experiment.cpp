#include "rembo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "rembo/random.hpp"
#include "rembo/stats.hpp"

namespace fs = std::filesystem;

namespace rembo {

ConfigError::ConfigError(std::string source, std::size_t line, const std::string& message)
    : std::invalid_argument(line ? fmt::format("{}:{}: {}", source, line, message)
                                 : fmt::format("{}: {}", source, message)),
      line_(line) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

template <class T>
T parse_number(const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) throw std::invalid_argument("'" + text + "' is not a valid number");
  return v;
}

double parse_positive(const std::string& text) {
  const double v = parse_number<double>(text);
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("expected a positive number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<T>(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

ObjectiveSpec::Id parse_objective(const std::string& s) {
  if (s == "branin_embedded") return ObjectiveSpec::Id::BraninEmbedded;
  if (s == "branin_rotated") return ObjectiveSpec::Id::BraninRotated;
  if (s == "synthetic_categorical") return ObjectiveSpec::Id::SyntheticCategorical;
  if (s == "external_command") return ObjectiveSpec::Id::ExternalCommand;
  throw std::invalid_argument(
      "unknown objective '" + s + "' (expected branin_embedded, branin_rotated, synthetic_categorical or external_command)");
}

KernelVariant parse_kernel(const std::string& s) {
  if (s == "se") return KernelVariant::LowDimSE;
  if (s == "se_projected") return KernelVariant::HighDimProjectedSE;
  if (s == "hamming") return KernelVariant::CategoricalHamming;
  throw std::invalid_argument("unknown kernel '" + s + "' (expected se, se_projected or hamming)");
}

std::uint64_t replication_seed(const ExperimentConfig& c, std::size_t r) { return derive_seed(c.global_seed, r); }

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "rembo") return Mode::Rembo;
  if (s == "bo") return Mode::Bo;
  if (s == "random") return Mode::RandomSearch;
  throw std::invalid_argument("unknown mode '" + s + "' (expected rembo, bo or random)");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig c;
  std::map<std::string, std::size_t> seen;
  bool have_d = false;
  bool have_k = false;
  bool have_D = false;

  using Handler = std::function<void(const std::string&)>;
  const std::map<std::string, Handler> handlers = {
      {"version",
       [&](const std::string& v) {
         if (parse_number<int>(v) != kConfigVersion) throw std::invalid_argument("unsupported version " + v);
       }},
      {"objective", [&](const std::string& v) { c.objective.id = parse_objective(v); }},
      {"D",
       [&](const std::string& v) {
         c.objective.D = parse_number<std::size_t>(v);
         have_D = true;
       }},
      {"objective_seed",
       [&](const std::string& v) {
         c.objective.seed = parse_number<std::uint64_t>(v);
         c.objective_seed_fixed = true;
       }},
      {"effective_dims", [&](const std::string& v) { c.objective.effective_dims = parse_list<std::size_t>(v); }},
      {"rotation_seed",
       [&](const std::string& v) {
         if (v == "identity") {
           c.identity_rotation = true;
         } else {
           c.objective.rotation_seed = parse_number<std::uint64_t>(v);
         }
       }},
      {"command",
       [&](const std::string& v) {
         if (!c.objective.command) c.objective.command.emplace();
         c.objective.command->program = v;
       }},
      {"command_args",
       [&](const std::string& v) {
         if (!c.objective.command) c.objective.command.emplace();
         std::istringstream words(v);
         for (std::string w; words >> w;) c.objective.command->args.push_back(w);
       }},
      {"command_timeout",
       [&](const std::string& v) {
         if (!c.objective.command) c.objective.command.emplace();
         c.objective.command->timeout_seconds = parse_positive(v);
       }},
      {"command_max_concurrent",
       [&](const std::string& v) {
         if (!c.objective.command) c.objective.command.emplace();
         c.objective.command->max_concurrent = parse_number<std::size_t>(v);
       }},
      {"categories", [&](const std::string& v) { c.objective.categories = CategoricalTable{parse_list<int>(v)}; }},
      {"sense",
       [&](const std::string& v) {
         if (v == "minimize") {
           c.objective.sense = Sense::Minimize;
         } else if (v == "maximize") {
           c.objective.sense = Sense::Maximize;
         } else {
           throw std::invalid_argument("sense must be minimize or maximize");
         }
       }},
      {"known_optimum", [&](const std::string& v) { c.objective.known_optimum = parse_number<double>(v); }},
      {"mode", [&](const std::string& v) { c.run.mode = parse_mode(v); }},
      {"modes",
       [&](const std::string& v) {
         for (const auto& m : split(v, ',')) c.modes.push_back(parse_mode(m));
       }},
      {"d",
       [&](const std::string& v) {
         c.d_values = parse_list<std::size_t>(v);
         have_d = true;
       }},
      {"k",
       [&](const std::string& v) {
         c.k_values = parse_list<std::size_t>(v);
         have_k = true;
       }},
      {"kernel", [&](const std::string& v) { c.run.kernel_variant = parse_kernel(v); }},
      {"budget", [&](const std::string& v) { c.run.total_budget = parse_number<std::size_t>(v); }},
      {"acquisition",
       [&](const std::string& v) {
         if (v == "ei") {
           c.run.acquisition.variant = AcquisitionSpec::Variant::ExpectedImprovement;
         } else if (v == "ucb") {
           c.run.acquisition.variant = AcquisitionSpec::Variant::UCB;
         } else {
           throw std::invalid_argument("acquisition must be ei or ucb");
         }
       }},
      {"ucb_beta", [&](const std::string& v) { c.run.acquisition.ucb_beta = parse_positive(v); }},
      {"inner_evals",
       [&](const std::string& v) { c.run.inner_evals = v == "auto" ? 0 : parse_number<std::size_t>(v); }},
      {"ell", [&](const std::string& v) { c.run.hyper.ell = parse_positive(v); }},
      {"ell_lower", [&](const std::string& v) { c.run.hyper.lower = parse_positive(v); }},
      {"ell_upper", [&](const std::string& v) { c.run.hyper.upper = parse_positive(v); }},
      {"t_sigma", [&](const std::string& v) { c.run.hyper.t_sigma = parse_positive(v); }},
      {"adapt_ell", [&](const std::string& v) { c.run.adapt_length_scale = parse_bool(v); }},
      {"embedding_scale", [&](const std::string& v) { c.run.embedding_scale = parse_positive(v); }},
      {"jitter", [&](const std::string& v) { c.run.jitter = parse_number<double>(v); }},
      {"normalization",
       [&](const std::string& v) {
         if (v == "center") {
           c.run.normalization = Normalization::Center;
         } else if (v == "standardize") {
           c.run.normalization = Normalization::Standardize;
         } else {
           throw std::invalid_argument("normalization must be center or standardize");
         }
       }},
      {"replications", [&](const std::string& v) { c.replications = parse_number<std::size_t>(v); }},
      {"seed", [&](const std::string& v) { c.global_seed = parse_number<std::uint64_t>(v); }},
      {"output", [&](const std::string& v) { c.output_dir = v; }},
  };

  std::string raw;
  std::size_t line_no = 0;
  bool versioned = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!versioned && key != "version") throw ConfigError(source, line_no, "the first setting must be 'version = 1'");
    versioned = true;
    const auto h = handlers.find(key);
    if (h == handlers.end()) throw ConfigError(source, line_no, "unknown key '" + key + "'");
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError(source, line_no, fmt::format("duplicate key '{}' (first set on line {})", key, prev->second));
    }
    seen[key] = line_no;
    if (value.empty()) throw ConfigError(source, line_no, "missing value for '" + key + "'");
    try {
      h->second(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, line_no, key + ": " + e.what());
    }
  }
  if (!versioned) throw ConfigError(source, 0, "empty configuration (expected 'version = 1')");

  const auto line_of = [&](const std::string& key) {
    const auto it = seen.find(key);
    return it == seen.end() ? std::size_t{0} : it->second;
  };
  if (!seen.count("objective")) throw ConfigError(source, 0, "missing required key 'objective'");
  if (c.objective.id == ObjectiveSpec::Id::SyntheticCategorical) {
    if (!have_D) c.objective.D = SyntheticCategorical::kBinary + SyntheticCategorical::kSevenValued;
  } else if (!have_D) {
    throw ConfigError(source, 0, "missing required key 'D'");
  }
  if (c.replications < 1) throw ConfigError(source, line_of("replications"), "replications must be >= 1");
  if (c.objective.id == ObjectiveSpec::Id::ExternalCommand && (!c.objective.command || c.objective.command->program.empty())) {
    throw ConfigError(source, line_of("objective"), "external_command needs 'command'");
  }
  {
    const auto& e = c.objective.effective_dims;
    const std::set<std::size_t> unique(e.begin(), e.end());
    if (unique.size() != e.size()) throw ConfigError(source, line_of("effective_dims"), "effective dims must be distinct");
    for (std::size_t i : e) {
      if (i >= c.objective.D) throw ConfigError(source, line_of("effective_dims"), "effective dims must be < D");
    }
  }
  if (!have_d) c.d_values = {c.run.d};
  if (!have_k) c.k_values = {c.run.k_interleaved};
  c.run.d = c.d_values.front();
  c.run.k_interleaved = c.k_values.front();
  if (c.modes.empty()) c.modes = {c.run.mode};
  if (!seen.count("ell") && (c.run.hyper.ell < c.run.hyper.lower || c.run.hyper.ell > c.run.hyper.upper)) {
    c.run.hyper.ell = std::clamp(c.run.hyper.ell, c.run.hyper.lower, c.run.hyper.upper);
  }
  try {
    c.run.hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, line_of("ell"), e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open file");
  return parse_config(in, path.string());
}

ObjectiveSpec objective_for(const ExperimentConfig& c, std::size_t r) {
  ObjectiveSpec spec = c.objective;
  const std::uint64_t rs = replication_seed(c, r);
  if (!c.objective_seed_fixed) spec.seed = derive_seed(rs, 1);
  if (spec.id == ObjectiveSpec::Id::BraninRotated) {
    if (c.identity_rotation) {
      spec.rotation_seed.reset();
    } else if (!spec.rotation_seed) {
      spec.rotation_seed = derive_seed(rs, 2);
    }
  }
  return spec;
}

std::uint64_t run_seed_for(const ExperimentConfig& c, std::size_t r) { return derive_seed(replication_seed(c, r), 3); }

std::vector<AggregateRow> aggregate_gaps(const std::vector<std::vector<std::optional<double>>>& traces) {
  std::size_t len = 0;
  for (const auto& t : traces) len = std::max(len, t.size());
  std::vector<AggregateRow> rows;
  rows.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> xs;
    for (const auto& t : traces) {
      if (i < t.size() && t[i]) xs.push_back(*t[i]);
    }
    AggregateRow row;
    row.eval_index = i + 1;
    row.n = xs.size();
    if (!xs.empty()) {
      row.mean_gap = stats::mean(xs);
      row.q25 = stats::quantile(xs, 0.25);
      row.q50 = stats::quantile(xs, 0.5);
      row.q75 = stats::quantile(xs, 0.75);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    if (r.n == 0) {
      out << r.eval_index << ",,,,,0\n";
    } else {
      out << fmt::format("{},{},{},{},{},{}\n", r.eval_index, r.mean_gap, r.q25, r.q50, r.q75, r.n);
    }
  }
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string slurp(std::ostringstream& s) { return std::move(s).str(); }

}  // namespace

std::vector<AggregateRow> read_aggregate_csv(const fs::path& path) {
  std::vector<AggregateRow> out;
  for (const auto& cells : read_csv(path, kAggregateHeader)) {
    if (cells.size() != 6) throw std::runtime_error(path.string() + ": expected 6 columns");
    AggregateRow r;
    r.eval_index = parse_number<std::size_t>(cells[0]);
    r.n = parse_number<std::size_t>(cells[5]);
    if (r.n > 0) {
      r.mean_gap = parse_number<double>(cells[1]);
      r.q25 = parse_number<double>(cells[2]);
      r.q50 = parse_number<double>(cells[3]);
      r.q75 = parse_number<double>(cells[4]);
    }
    out.push_back(r);
  }
  return out;
}

std::vector<std::optional<double>> read_trace_gaps(const fs::path& path) {
  std::vector<std::optional<double>> out;
  for (const auto& cells : read_csv(path, kTraceHeader)) {
    if (cells.size() != 8) throw std::runtime_error(path.string() + ": expected 8 columns");
    out.push_back(cells[2].empty() ? std::nullopt : std::optional<double>(parse_number<double>(cells[2])));
  }
  return out;
}

std::vector<double> CellResult::successful_final_gaps() const {
  std::vector<double> out;
  for (const auto& g : final_gaps) {
    if (g) out.push_back(*g);
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

struct CellPlan {
  std::string name;
  RunConfig run;
};

/// Validates every cell against replication 0's objective before any work starts.
void precheck(const ExperimentConfig& c, const std::vector<CellPlan>& cells) {
  const auto objective = make_objective(objective_for(c, 0));
  for (const auto& cell : cells) {
    cell.run.validate(objective->dimension());
    if (cell.run.mode == Mode::Rembo && cell.run.kernel_variant == KernelVariant::CategoricalHamming &&
        !objective->categories()) {
      throw std::invalid_argument("kernel hamming needs an objective with categories");
    }
  }
}

ExperimentOutcome execute(const ExperimentConfig& c, const std::vector<CellPlan>& plans, std::size_t jobs) {
  precheck(c, plans);
  ExperimentOutcome outcome;
  outcome.cells.resize(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    auto& cell = outcome.cells[i];
    cell.name = plans[i].name;
    cell.run = plans[i].run;
    cell.final_gaps.assign(c.replications, std::nullopt);
    cell.errors.assign(c.replications, std::string());
    fs::create_directories(c.output_dir / cell.name);
  }
  std::vector<std::vector<std::vector<std::optional<double>>>> traces(
      plans.size(), std::vector<std::vector<std::optional<double>>>(c.replications));
  std::vector<std::vector<char>> ok(plans.size(), std::vector<char>(c.replications, 0));

  const std::size_t tasks = plans.size() * c.replications;
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t ci = t / c.replications;
      const std::size_t r = t % c.replications;
      auto& cell = outcome.cells[ci];
      const fs::path base = c.output_dir / cell.name / fmt::format("rep_{:03}", r);
      try {
        const auto objective = make_objective(objective_for(c, r));
        RunConfig run = plans[ci].run;
        run.seed = run_seed_for(c, r);
        const RunReport report = rembo::run(run, *objective);
        std::ostringstream csv;
        write_trace_csv(csv, report);
        std::ostringstream meta;
        write_report_meta(meta, report);
        write_file_atomic(fs::path(base) += ".csv", slurp(csv));
        write_file_atomic(fs::path(base) += ".meta", slurp(meta));
        auto& tr = traces[ci][r];
        for (const auto& row : report.trace) tr.push_back(row.best_gap);
        cell.final_gaps[r] = report.final_gap();
        ok[ci][r] = 1;
      } catch (const std::exception& e) {
        cell.errors[r] = e.what();
        std::error_code ec;
        write_file_atomic(fs::path(base) += ".error", std::string(e.what()) + "\n");
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(tasks, 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  for (std::size_t ci = 0; ci < plans.size(); ++ci) {
    auto& cell = outcome.cells[ci];
    for (std::size_t r = 0; r < c.replications; ++r) {
      if (ok[ci][r]) {
        cell.gap_traces.push_back(std::move(traces[ci][r]));
      } else {
        ++outcome.failed_replications;
      }
    }
    std::erase(cell.errors, std::string());
    cell.aggregate = aggregate_gaps(cell.gap_traces);
    std::ostringstream agg;
    write_aggregate_csv(agg, cell.aggregate);
    write_file_atomic(c.output_dir / cell.name / "aggregate.csv", slurp(agg));
  }
  return outcome;
}

std::string cell_name(const RunConfig& r) {
  switch (r.mode) {
    case Mode::Rembo: return fmt::format("rembo_d{}_k{}", r.d, r.k_interleaved);
    case Mode::Bo: return fmt::format("bo_k{}", r.k_interleaved);
    case Mode::RandomSearch: return "random";
  }
  return "cell";
}

std::string fmt_stat(const std::vector<double>& xs, double (*f)(std::span<const double>)) {
  return xs.empty() ? std::string() : fmt::format("{}", f(xs));
}

double median_of(std::span<const double> xs) { return stats::median(std::vector<double>(xs.begin(), xs.end())); }

double stddev_or_zero(std::span<const double> xs) { return xs.size() < 2 ? 0.0 : stats::stddev(xs); }

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& c, std::size_t jobs) {
  if (c.run.mode == Mode::RandomSearch && (c.d_values.size() > 1 || c.k_values.size() > 1)) {
    throw std::invalid_argument("d and k lists need mode rembo or bo");
  }
  if (c.run.mode == Mode::Bo && c.d_values.size() > 1) throw std::invalid_argument("a d list needs mode rembo");
  std::vector<CellPlan> plans;
  for (std::size_t k : c.k_values) {
    for (std::size_t d : c.d_values) {
      RunConfig run = c.run;
      run.d = d;
      run.k_interleaved = k;
      plans.push_back({cell_name(run), run});
    }
  }
  ExperimentOutcome outcome = execute(c, plans, jobs);

  if (plans.size() > 1) {
    std::ostringstream csv;
    csv << "cell,mode,d,k,n,mean_final_gap,std_final_gap,median_final_gap\n";
    for (const auto& cell : outcome.cells) {
      const auto gaps = cell.successful_final_gaps();
      csv << fmt::format("{},{},{},{},{},{},{},{}\n", cell.name, to_string(cell.run.mode), cell.run.d,
                         cell.run.k_interleaved, gaps.size(), fmt_stat(gaps, stats::mean),
                         fmt_stat(gaps, stddev_or_zero), fmt_stat(gaps, median_of));
    }
    write_file_atomic(c.output_dir / "summary.csv", slurp(csv));

    // Rows k, columns d: mean +- std of the final gap.
    std::ostringstream txt;
    txt << fmt::format("{:>6}", "k \\ d");
    for (std::size_t d : c.d_values) txt << fmt::format(" | {:^21}", fmt::format("d = {}", d));
    txt << '\n';
    std::size_t i = 0;
    for (std::size_t k : c.k_values) {
      txt << fmt::format("{:>6}", k);
      for (std::size_t j = 0; j < c.d_values.size(); ++j, ++i) {
        const auto gaps = outcome.cells[i].successful_final_gaps();
        txt << (gaps.empty() ? fmt::format(" | {:^21}", "-")
                             : fmt::format(" | {:>9.4g} +- {:<8.4g}", stats::mean(gaps), stddev_or_zero(gaps)));
      }
      txt << '\n';
    }
    write_file_atomic(c.output_dir / "summary.txt", slurp(txt));
  }
  return outcome;
}

ExperimentOutcome compare_modes(const ExperimentConfig& c, std::size_t jobs) {
  if (c.modes.size() < 2) throw std::invalid_argument("compare needs at least two modes");
  if (std::set<Mode>(c.modes.begin(), c.modes.end()).size() != c.modes.size()) {
    throw std::invalid_argument("compare: modes must be distinct");
  }
  if (c.d_values.size() > 1 || c.k_values.size() > 1) throw std::invalid_argument("compare takes single d and k values");
  std::vector<CellPlan> plans;
  for (Mode m : c.modes) {
    RunConfig run = c.run;
    run.mode = m;
    if (m != Mode::Rembo) {
      // Baselines run as a single sequential search with the plain SE kernel.
      run.k_interleaved = 1;
      run.kernel_variant = KernelVariant::LowDimSE;
    }
    plans.push_back({to_string(m), run});
  }
  ExperimentOutcome outcome = execute(c, plans, jobs);

  for (const auto& cell : outcome.cells) {
    std::ostringstream agg;
    write_aggregate_csv(agg, cell.aggregate);
    write_file_atomic(c.output_dir / fmt::format("aggregate_{}.csv", cell.name), slurp(agg));
  }
  std::vector<std::size_t> order(outcome.cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto key = [&](std::size_t i) {
    const auto gaps = outcome.cells[i].successful_final_gaps();
    const double inf = std::numeric_limits<double>::infinity();
    return std::pair(gaps.empty() ? inf : stats::median(gaps), gaps.empty() ? inf : stats::mean(gaps));
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::ostringstream csv;
  csv << "rank,mode,median_final_gap,mean_final_gap,n\n";
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& cell = outcome.cells[order[rank]];
    const auto gaps = cell.successful_final_gaps();
    csv << fmt::format("{},{},{},{},{}\n", rank + 1, cell.name, fmt_stat(gaps, median_of), fmt_stat(gaps, stats::mean),
                       gaps.size());
  }
  write_file_atomic(c.output_dir / "ranking.csv", slurp(csv));
  return outcome;
}

namespace {

void compare_aggregate(const fs::path& agg_path, const fs::path& cell_dir, double tol, VerifyResult& res) {
  std::vector<fs::path> reps;
  for (const auto& e : fs::directory_iterator(cell_dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("rep_") && e.path().extension() == ".csv") reps.push_back(e.path());
  }
  std::sort(reps.begin(), reps.end());
  std::vector<std::vector<std::optional<double>>> traces;
  for (const auto& p : reps) traces.push_back(read_trace_gaps(p));
  const auto expected = aggregate_gaps(traces);
  const auto actual = read_aggregate_csv(agg_path);
  ++res.aggregates_checked;
  if (expected.size() != actual.size()) {
    res.mismatches.push_back(fmt::format("{}: {} rows, recomputed {}", agg_path.string(), actual.size(), expected.size()));
    return;
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = expected[i];
    const auto& a = actual[i];
    const auto close = [&](double x, double y) { return std::abs(x - y) <= tol; };
    if (e.eval_index != a.eval_index || e.n != a.n ||
        (e.n > 0 && !(close(e.mean_gap, a.mean_gap) && close(e.q25, a.q25) && close(e.q50, a.q50) &&
                      close(e.q75, a.q75)))) {
      res.mismatches.push_back(fmt::format("{}: row {} differs from recomputation", agg_path.string(), i + 1));
      return;
    }
  }
}

}  // namespace

VerifyResult verify_aggregates(const fs::path& dir, double tol) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  VerifyResult res;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    const std::string name = p.filename().string();
    if (fs::is_directory(p) && fs::exists(p / "aggregate.csv")) {
      compare_aggregate(p / "aggregate.csv", p, tol, res);
    } else if (name.starts_with("aggregate_") && p.extension() == ".csv") {
      const std::string cell = p.stem().string().substr(std::string("aggregate_").size());
      if (!fs::is_directory(dir / cell)) {
        res.mismatches.push_back(p.string() + ": no replication directory '" + cell + "'");
        continue;
      }
      compare_aggregate(p, dir / cell, tol, res);
    }
  }
  if (fs::exists(dir / "aggregate.csv")) compare_aggregate(dir / "aggregate.csv", dir, tol, res);
  return res;
}

}  // namespace rembo
