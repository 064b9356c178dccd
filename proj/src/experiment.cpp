#include "ragcomp/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "ragcomp/analysis.hpp"
#include "ragcomp/error.hpp"
#include "ragcomp/metrics.hpp"
#include "ragcomp/rng.hpp"

namespace ragcomp::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version() { return "0.1.0"; }

namespace {

// Shortest round-trip representation; keeps CSV cells byte-stable across runs.
std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_signed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f", digits, v);
  return buf;
}

std::string now_iso8601() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out.flush()) fail(ErrorKind::Io, "short write to " + path.string());
}

fs::path resolve_path(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  return fs::path(base_dir) / p;
}

// One stage at a time per run directory; created O_EXCL, removed on exit.
class RunLock {
 public:
  explicit RunLock(const fs::path& out_dir) : path_(out_dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        fail(ErrorKind::State,
             "run directory " + out_dir.string() + " is locked (" +
                 path_.string() +
                 " exists); remove the lock file if no other stage is active");
      }
      fail(ErrorKind::Io, "cannot create lock file " + path_.string());
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

void check_keys(const json& node, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) {
      fail(ErrorKind::Config, "unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  const json& node = root.at(key);
  if (!node.is_object()) {
    fail(ErrorKind::Config, std::string("\"") + key + "\" must be an object");
  }
  return node;
}

std::string get_string(const json& node, const char* key, std::string fallback,
                       const std::string& where) {
  if (!node.contains(key)) return fallback;
  if (!node.at(key).is_string()) {
    fail(ErrorKind::Config,
         "\"" + std::string(key) + "\" in " + where + " must be a string");
  }
  return node.at(key).get<std::string>();
}

bool get_bool(const json& node, const char* key, bool fallback,
              const std::string& where) {
  if (!node.contains(key)) return fallback;
  if (!node.at(key).is_boolean()) {
    fail(ErrorKind::Config,
         "\"" + std::string(key) + "\" in " + where + " must be a boolean");
  }
  return node.at(key).get<bool>();
}

double get_number(const json& node, const char* key, double fallback,
                  const std::string& where) {
  if (!node.contains(key)) return fallback;
  if (!node.at(key).is_number()) {
    fail(ErrorKind::Config,
         "\"" + std::string(key) + "\" in " + where + " must be a number");
  }
  return node.at(key).get<double>();
}

size_t get_count(const json& node, const char* key, size_t fallback,
                 const std::string& where) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_number_integer() ||
      (v.is_number_integer() && !v.is_number_unsigned() && v.get<int64_t>() < 0)) {
    fail(ErrorKind::Config, "\"" + std::string(key) + "\" in " + where +
                                " must be a non-negative integer");
  }
  return static_cast<size_t>(v.get<uint64_t>());
}

json config_snapshot(const RunConfig& cfg) {
  json conditions = json::array();
  for (const auto& c : cfg.conditions) {
    conditions.push_back({{"kind", context::kind_name(c.kind)},
                          {"name", c.name()},
                          {"hard_count", c.hard_count},
                          {"far_count", c.far_count}});
  }
  return json{
      {"corpus_path", resolve_path(cfg.config_dir, cfg.corpus_path).string()},
      {"tokenizer", {{"lowercase", cfg.tokenizer.lowercase}}},
      {"bm25", {{"k1", cfg.bm25.k1}, {"b", cfg.bm25.b}}},
      {"retrieval", {{"far_rank_threshold", cfg.far_rank_threshold}}},
      {"sample", {{"n_questions", cfg.n_questions}, {"seed", cfg.seed}}},
      {"context",
       {{"snippet_words", cfg.snippet_words}, {"conditions", conditions}}},
      {"prompt",
       {{"instruction", cfg.prompt.instruction},
        {"question_prefix", cfg.prompt.question_prefix},
        {"answer_cue", cfg.prompt.answer_cue}}},
      {"reader",
       {{"kind", cfg.reader_kind},
        {"label", cfg.reader_label},
        {"model", cfg.reader_config.model},
        {"endpoint", cfg.reader_config.endpoint},
        {"temperature", cfg.reader_config.temperature},
        {"max_output_tokens", cfg.reader_config.max_output_tokens},
        {"timeout_s", cfg.reader_config.timeout_s},
        {"max_concurrency", cfg.reader_config.max_concurrency},
        {"retry_budget", cfg.reader_config.retry_budget},
        {"retry_backoff_ms", cfg.reader_config.retry_backoff_ms},
        {"cache_dir", cfg.reader_config.cache_dir},
        {"api_key_env", cfg.reader_config.api_key_env}}},
      {"analysis",
       {{"bootstrap_resamples", cfg.analysis.bootstrap_resamples},
        {"mc_draws", cfg.analysis.mc_draws},
        {"exact_n_max", cfg.analysis.exact_n_max}}}};
}

void write_manifest(const RunConfig& cfg, const fs::path& out_dir,
                    const char* stage) {
  const fs::path path = out_dir / "manifest.json";
  json manifest = json::object();
  if (fs::exists(path)) {
    json existing = json::parse(read_file(path), nullptr,
                                /*allow_exceptions=*/false);
    if (existing.is_object()) manifest = std::move(existing);
  }
  manifest["tool"] = "ragcomp";
  manifest["version"] = version();
  if (!manifest.contains("created_at")) manifest["created_at"] = now_iso8601();
  manifest["config"] = config_snapshot(cfg);
  manifest["prng"] = {{"engine", "mt19937_64"},
                      {"uniform", "rejection sampling"},
                      {"seed_derivation", "splitmix64 mix of seed and tag hash"}};
  if (!manifest.contains("stages") || !manifest["stages"].is_object()) {
    manifest["stages"] = json::object();
  }
  manifest["stages"][stage] = now_iso8601();
  write_file(path, manifest.dump(2) + "\n");
  write_file(out_dir / "config.json", cfg.raw);
}

void require_artifact(const fs::path& path, const char* produced_by) {
  if (!fs::exists(path)) {
    fail(ErrorKind::State, "missing " + path.string() + "; run the " +
                               produced_by + " stage first");
  }
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Parse,
           path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

json context_to_json(const context::BuiltContext& ctx) {
  json snippets = json::array();
  for (const auto& s : ctx.snippets) {
    snippets.push_back({{"source_passage_id", s.source_passage_id},
                        {"text", s.text},
                        {"word_count", s.word_count},
                        {"is_gold", s.is_gold}});
  }
  return json{{"question_id", ctx.question_id},
              {"condition", ctx.condition.name()},
              {"kind", context::kind_name(ctx.condition.kind)},
              {"hard_count", ctx.condition.hard_count},
              {"far_count", ctx.condition.far_count},
              {"snippet_words", ctx.condition.snippet_words},
              {"gold_position", ctx.gold_position},
              {"truncated_answer", ctx.truncated_answer},
              {"prompt", ctx.prompt},
              {"snippets", snippets}};
}

context::BuiltContext context_from_json(const json& row, uint64_t seed,
                                        const std::string& where) {
  if (!row.is_object()) fail(ErrorKind::Parse, where + ": expected object");
  context::BuiltContext ctx;
  try {
    ctx.question_id = row.at("question_id").get<std::string>();
    ctx.condition.kind =
        context::kind_from_name(row.at("kind").get<std::string>());
    ctx.condition.hard_count = row.at("hard_count").get<size_t>();
    ctx.condition.far_count = row.at("far_count").get<size_t>();
    ctx.condition.snippet_words = row.at("snippet_words").get<size_t>();
    ctx.condition.seed = seed;
    ctx.gold_position = row.at("gold_position").get<size_t>();
    ctx.truncated_answer = row.at("truncated_answer").get<bool>();
    ctx.prompt = row.at("prompt").get<std::string>();
    for (const auto& s : row.at("snippets")) {
      context::Snippet snippet;
      snippet.source_passage_id = s.at("source_passage_id").get<std::string>();
      snippet.text = s.at("text").get<std::string>();
      snippet.word_count = s.at("word_count").get<size_t>();
      snippet.is_gold = s.at("is_gold").get<bool>();
      ctx.snippets.push_back(std::move(snippet));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, where + ": " + e.what());
  }
  return ctx;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  Csv csv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (csv.header.empty()) {
      csv.header = std::move(fields);
    } else {
      if (fields.size() != csv.header.size()) {
        fail(ErrorKind::Parse, path.string() + ": ragged row");
      }
      csv.rows.push_back(std::move(fields));
    }
  }
  if (csv.header.empty()) fail(ErrorKind::Parse, path.string() + ": empty CSV");
  return csv;
}

double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(ErrorKind::Parse, where + ": bad number \"" + text + "\"");
  }
  return value;
}

// Cells are written unquoted, so field text must stay comma- and
// newline-free.
void check_csv_safe(const std::string& text, const char* what) {
  if (text.find(',') != std::string::npos ||
      text.find('\n') != std::string::npos) {
    fail(ErrorKind::Config,
         std::string(what) + " may not contain commas or newlines: " + text);
  }
}

std::string display_condition(const std::string& name) {
  if (name == "gold_only") return "Gold only";
  if (name.rfind("hard_", 0) == 0) {
    return "Hard (H=" + name.substr(5) + ")";
  }
  if (name.rfind("far_", 0) == 0) {
    const std::string counts = name.substr(4);
    const size_t sep = counts.find('_');
    if (sep != std::string::npos) {
      return "Far control (" + counts.substr(0, sep) + " hard + " +
             counts.substr(sep + 1) + " far)";
    }
  }
  return name;
}

std::string display_metric(const std::string& metric) {
  if (metric == "em") return "EM";
  if (metric == "inclusion") return "Inclusion";
  if (metric == "f1") return "F1";
  return metric;
}

// Digits used when formatting a metric value for the report.
int metric_digits(const std::string& metric) { return metric == "f1" ? 3 : 1; }

std::string fmt_p(double p) {
  if (p < 0.0005) return "<0.001";
  return fmt_fixed(p, 3);
}

const char* metric_color(const std::string& metric) {
  if (metric == "em") return "#1f77b4";
  if (metric == "inclusion") return "#2ca02c";
  if (metric == "f1") return "#d62728";
  return "#7f7f7f";
}

}  // namespace

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  const fs::path p(path);
  cfg.raw = read_file(p);
  cfg.config_dir = p.has_parent_path() ? p.parent_path().string() : ".";

  json root;
  try {
    root = json::parse(cfg.raw);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, path + ": " + e.what());
  }
  if (!root.is_object()) {
    fail(ErrorKind::Config, path + ": config must be a JSON object");
  }
  check_keys(root, "config", {"corpus", "tokenizer", "bm25", "retrieval",
                              "sample", "context", "prompt", "reader",
                              "analysis"});

  const json& corpus = section(root, "corpus");
  check_keys(corpus, "corpus", {"path"});
  cfg.corpus_path = get_string(corpus, "path", "", "corpus");
  if (cfg.corpus_path.empty()) {
    fail(ErrorKind::Config, "config requires corpus.path");
  }

  const json& tokenizer = section(root, "tokenizer");
  check_keys(tokenizer, "tokenizer", {"lowercase"});
  cfg.tokenizer.lowercase = get_bool(tokenizer, "lowercase", true, "tokenizer");

  const json& bm25 = section(root, "bm25");
  check_keys(bm25, "bm25", {"k1", "b"});
  cfg.bm25.k1 = get_number(bm25, "k1", 1.2, "bm25");
  cfg.bm25.b = get_number(bm25, "b", 0.75, "bm25");
  if (cfg.bm25.k1 < 0.0 || cfg.bm25.b < 0.0 || cfg.bm25.b > 1.0) {
    fail(ErrorKind::Config, "bm25 requires k1 >= 0 and b in [0, 1]");
  }

  const json& retrieval_cfg = section(root, "retrieval");
  check_keys(retrieval_cfg, "retrieval", {"far_rank_threshold"});
  cfg.far_rank_threshold =
      get_count(retrieval_cfg, "far_rank_threshold", 500, "retrieval");
  if (cfg.far_rank_threshold == 0) {
    fail(ErrorKind::Config, "retrieval.far_rank_threshold must be >= 1");
  }

  const json& sample = section(root, "sample");
  check_keys(sample, "sample", {"n_questions", "seed"});
  cfg.n_questions = get_count(sample, "n_questions", 200, "sample");
  if (cfg.n_questions == 0) {
    fail(ErrorKind::Config, "sample.n_questions must be >= 1");
  }
  cfg.seed = static_cast<uint64_t>(get_count(sample, "seed", 13, "sample"));

  const json& ctx = section(root, "context");
  check_keys(ctx, "context", {"snippet_words", "conditions"});
  cfg.snippet_words = get_count(ctx, "snippet_words", 50, "context");
  if (cfg.snippet_words == 0) {
    fail(ErrorKind::Config, "context.snippet_words must be >= 1");
  }
  if (ctx.contains("conditions")) {
    if (!ctx.at("conditions").is_array() || ctx.at("conditions").empty()) {
      fail(ErrorKind::Config, "context.conditions must be a non-empty array");
    }
    for (const auto& node : ctx.at("conditions")) {
      if (!node.is_object()) {
        fail(ErrorKind::Config, "each condition must be an object");
      }
      check_keys(node, "condition", {"kind", "hard_count", "far_count"});
      const std::string kind = get_string(node, "kind", "", "condition");
      context::ConditionSpec spec;
      spec.kind = context::kind_from_name(kind);
      spec.hard_count = get_count(node, "hard_count", 0, "condition");
      spec.far_count = get_count(node, "far_count", 0, "condition");
      cfg.conditions.push_back(spec);
    }
  } else {
    cfg.conditions = {context::ConditionSpec::gold_only(0, 0),
                      context::ConditionSpec::hard(19, 0, 0),
                      context::ConditionSpec::far_control(4, 15, 0, 0)};
  }
  for (auto& spec : cfg.conditions) {
    spec.snippet_words = cfg.snippet_words;
    spec.seed = cfg.seed;
    spec.validate();
  }
  for (size_t i = 0; i < cfg.conditions.size(); ++i) {
    for (size_t j = i + 1; j < cfg.conditions.size(); ++j) {
      if (cfg.conditions[i].name() == cfg.conditions[j].name()) {
        fail(ErrorKind::Config,
             "duplicate condition " + cfg.conditions[i].name());
      }
    }
  }

  const json& prompt = section(root, "prompt");
  check_keys(prompt, "prompt", {"instruction", "question_prefix", "answer_cue"});
  cfg.prompt.instruction =
      get_string(prompt, "instruction", cfg.prompt.instruction, "prompt");
  cfg.prompt.question_prefix = get_string(prompt, "question_prefix",
                                          cfg.prompt.question_prefix, "prompt");
  cfg.prompt.answer_cue =
      get_string(prompt, "answer_cue", cfg.prompt.answer_cue, "prompt");

  const json& reader = section(root, "reader");
  check_keys(reader, "reader",
             {"kind", "label", "endpoint", "model", "temperature",
              "max_output_tokens", "timeout_s", "max_concurrency",
              "retry_budget", "retry_backoff_ms", "cache_dir", "api_key_env"});
  cfg.reader_kind = get_string(reader, "kind", "oracle", "reader");
  if (cfg.reader_kind != "oracle" && cfg.reader_kind != "http") {
    fail(ErrorKind::Config, "reader.kind must be \"oracle\" or \"http\"");
  }
  auto& rc = cfg.reader_config;
  rc.endpoint = get_string(reader, "endpoint", "", "reader");
  rc.model = get_string(reader, "model", "", "reader");
  rc.temperature = get_number(reader, "temperature", 0.0, "reader");
  rc.max_output_tokens = static_cast<int>(
      get_count(reader, "max_output_tokens", 64, "reader"));
  rc.timeout_s = static_cast<int>(get_count(reader, "timeout_s", 60, "reader"));
  rc.max_concurrency =
      static_cast<int>(get_count(reader, "max_concurrency", 4, "reader"));
  rc.retry_budget =
      static_cast<int>(get_count(reader, "retry_budget", 3, "reader"));
  rc.retry_backoff_ms =
      static_cast<int>(get_count(reader, "retry_backoff_ms", 250, "reader"));
  rc.cache_dir = get_string(reader, "cache_dir", "", "reader");
  if (!rc.cache_dir.empty()) {
    rc.cache_dir = resolve_path(cfg.config_dir, rc.cache_dir).string();
  }
  rc.api_key_env = get_string(reader, "api_key_env", rc.api_key_env, "reader");
  if (rc.temperature < 0.0) {
    fail(ErrorKind::Config, "reader.temperature must be >= 0");
  }
  if (rc.max_output_tokens <= 0 || rc.max_concurrency <= 0) {
    fail(ErrorKind::Config,
         "reader.max_output_tokens and reader.max_concurrency must be >= 1");
  }
  if (cfg.reader_kind == "http" && (rc.endpoint.empty() || rc.model.empty())) {
    fail(ErrorKind::Config,
         "reader.kind \"http\" requires reader.endpoint and reader.model");
  }
  cfg.reader_label = get_string(
      reader, "label",
      cfg.reader_kind == "http" ? rc.model : std::string("oracle"), "reader");
  check_csv_safe(cfg.reader_label, "reader.label");

  const json& analysis_cfg = section(root, "analysis");
  check_keys(analysis_cfg, "analysis",
             {"bootstrap_resamples", "mc_draws", "exact_n_max"});
  cfg.analysis.bootstrap_resamples =
      get_count(analysis_cfg, "bootstrap_resamples", 10000, "analysis");
  cfg.analysis.mc_draws = get_count(analysis_cfg, "mc_draws", 10000, "analysis");
  cfg.analysis.exact_n_max =
      get_count(analysis_cfg, "exact_n_max", 20, "analysis");
  if (cfg.analysis.bootstrap_resamples < 1000) {
    fail(ErrorKind::Config, "analysis.bootstrap_resamples must be >= 1000");
  }
  if (cfg.analysis.mc_draws == 0) {
    fail(ErrorKind::Config, "analysis.mc_draws must be >= 1");
  }
  if (cfg.analysis.exact_n_max > 25) {
    fail(ErrorKind::Config,
         "analysis.exact_n_max above 25 would enumerate >2^25 sign patterns");
  }
  return cfg;
}

void stage_ingest(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  const fs::path src = resolve_path(cfg.config_dir, cfg.corpus_path);
  Corpus corpus = load_squad(src.string());
  dump_corpus_jsonl(corpus, (fs::path(out_dir) / "corpus.jsonl").string());
  write_manifest(cfg, out_dir, "ingest");
  std::fprintf(stderr, "[ingest] %zu passages, %zu questions from %s\n",
               corpus.passages().size(), corpus.questions().size(),
               src.c_str());
}

void stage_index(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  const fs::path corpus_path = fs::path(out_dir) / "corpus.jsonl";
  require_artifact(corpus_path, "ingest");
  Corpus corpus = load_corpus_jsonl(corpus_path.string());
  retrieval::InvertedIndex index =
      retrieval::build_index(corpus, cfg.tokenizer, cfg.bm25);
  retrieval::save_index(index, (fs::path(out_dir) / "index.json").string());
  write_manifest(cfg, out_dir, "index");
  std::fprintf(stderr, "[index] %zu documents, %zu terms, avgdl %.2f\n",
               index.doc_count(), index.all_postings().size(),
               index.avg_doc_length());
}

namespace {

retrieval::InvertedIndex load_run_index(const RunConfig& cfg,
                                        const fs::path& out_dir) {
  const fs::path index_path = out_dir / "index.json";
  require_artifact(index_path, "index");
  retrieval::InvertedIndex index = retrieval::load_index(index_path.string());
  if (index.bm25().k1 != cfg.bm25.k1 || index.bm25().b != cfg.bm25.b ||
      index.tokenizer().lowercase != cfg.tokenizer.lowercase) {
    fail(ErrorKind::State,
         "index.json was built with different retrieval parameters; re-run "
         "the index stage");
  }
  return index;
}

}  // namespace

void stage_build(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  const fs::path corpus_path = fs::path(out_dir) / "corpus.jsonl";
  require_artifact(corpus_path, "ingest");
  Corpus corpus = load_corpus_jsonl(corpus_path.string());
  retrieval::InvertedIndex index = load_run_index(cfg, out_dir);

  const std::vector<Question> questions =
      sample_questions(corpus, cfg.n_questions, cfg.seed);

  const fs::path out_path = fs::path(out_dir) / "contexts.jsonl";
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + out_path.string());
  size_t truncated = 0;
  for (const auto& question : questions) {
    for (const auto& condition : cfg.conditions) {
      context::BuiltContext ctx =
          context::build_context(question, corpus, index, condition,
                                 cfg.prompt, cfg.far_rank_threshold);
      truncated += ctx.truncated_answer ? 1 : 0;
      out << context_to_json(ctx).dump() << "\n";
    }
  }
  if (!out.flush()) fail(ErrorKind::Io, "short write to " + out_path.string());
  write_manifest(cfg, out_dir, "build");
  std::fprintf(stderr,
               "[build] %zu contexts (%zu questions x %zu conditions), "
               "%zu truncated answers\n",
               questions.size() * cfg.conditions.size(), questions.size(),
               cfg.conditions.size(), truncated);
}

void stage_run(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  const fs::path corpus_path = fs::path(out_dir) / "corpus.jsonl";
  const fs::path contexts_path = fs::path(out_dir) / "contexts.jsonl";
  require_artifact(corpus_path, "ingest");
  require_artifact(contexts_path, "build");
  Corpus corpus = load_corpus_jsonl(corpus_path.string());

  std::vector<context::BuiltContext> contexts;
  {
    const auto rows = read_jsonl(contexts_path);
    contexts.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      contexts.push_back(context_from_json(
          rows[i], cfg.seed,
          contexts_path.string() + " row " + std::to_string(i + 1)));
    }
  }

  auto reader =
      reader::make_reader(cfg.reader_kind, cfg.reader_config, corpus);
  const auto predictions = reader::run_batch(
      contexts, corpus, *reader, cfg.reader_config.max_concurrency);

  {
    const fs::path path = fs::path(out_dir) / "predictions.jsonl";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& pred : predictions) {
      json row{{"question_id", pred.question_id},
               {"condition", pred.condition},
               {"output", pred.output},
               {"prompt_tokens", pred.prompt_tokens},
               {"token_provenance",
                reader::token_provenance_name(pred.token_provenance)},
               {"latency_ms", pred.latency_ms},
               {"cache_hit", pred.cache_hit},
               {"ok", pred.ok}};
      if (!pred.ok) row["error"] = pred.error;
      out << row.dump() << "\n";
    }
    if (!out.flush()) fail(ErrorKind::Io, "short write to " + path.string());
  }

  std::vector<metrics::ScoreRecord> records;
  size_t failures = 0;
  for (const auto& pred : predictions) {
    if (!pred.ok) {
      ++failures;
      continue;
    }
    const Question& question = corpus.question(pred.question_id);
    records.push_back(metrics::score_prediction(
        pred.question_id, pred.condition, pred.output, question.gold_answers,
        static_cast<long>(pred.prompt_tokens)));
  }
  if (failures > 0) {
    std::fprintf(stderr,
                 "[run] warning: %zu prediction(s) failed and were excluded "
                 "from scoring\n",
                 failures);
  }

  {
    const fs::path path = fs::path(out_dir) / "scores.jsonl";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& rec : records) {
      json row{{"question_id", rec.question_id},
               {"condition", rec.condition},
               {"em", rec.em},
               {"f1", rec.f1},
               {"inclusion", rec.inclusion},
               {"prompt_tokens", rec.prompt_tokens}};
      out << row.dump() << "\n";
    }
    if (!out.flush()) fail(ErrorKind::Io, "short write to " + path.string());
  }

  {
    const fs::path path = fs::path(out_dir) / "aggregates.csv";
    std::string csv = "reader,condition,em,inclusion,f1,avg_prompt_tokens,n\n";
    for (const auto& condition : cfg.conditions) {
      const std::string name = condition.name();
      std::vector<metrics::ScoreRecord> group;
      for (const auto& rec : records) {
        if (rec.condition == name) group.push_back(rec);
      }
      if (group.empty()) continue;
      const metrics::AggregateScores agg = metrics::aggregate(group);
      csv += cfg.reader_label + "," + name + "," + fmt_double(agg.em_pct) +
             "," + fmt_double(agg.inclusion_pct) + "," +
             fmt_double(agg.f1_mean) + "," + fmt_double(agg.avg_tokens) + "," +
             std::to_string(agg.n) + "\n";
    }
    write_file(path, csv);
  }

  write_manifest(cfg, out_dir, "run");
  std::fprintf(stderr, "[run] %zu predictions, %zu scored\n",
               predictions.size(), records.size());
}

void stage_analyze(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  const fs::path scores_path = fs::path(out_dir) / "scores.jsonl";
  require_artifact(scores_path, "run");

  std::vector<metrics::ScoreRecord> records;
  for (const auto& row : read_jsonl(scores_path)) {
    metrics::ScoreRecord rec;
    try {
      rec.question_id = row.at("question_id").get<std::string>();
      rec.condition = row.at("condition").get<std::string>();
      rec.em = row.at("em").get<int>();
      rec.f1 = row.at("f1").get<double>();
      rec.inclusion = row.at("inclusion").get<int>();
      rec.prompt_tokens = row.at("prompt_tokens").get<long>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, scores_path.string() + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }

  // Group scores by condition, preserving row order within each group.
  std::map<std::string, std::vector<metrics::ScoreRecord>> by_condition;
  for (const auto& rec : records) by_condition[rec.condition].push_back(rec);

  std::vector<std::string> notes;
  const std::array<std::string, 3> metric_names{"em", "inclusion", "f1"};
  const auto metric_of = [](const metrics::AggregateScores& agg,
                            const std::string& metric) {
    if (metric == "em") return agg.em_pct;
    if (metric == "inclusion") return agg.inclusion_pct;
    return agg.f1_mean;
  };

  const context::ConditionSpec* gold = nullptr;
  std::vector<const context::ConditionSpec*> hard;
  std::vector<const context::ConditionSpec*> far;
  for (const auto& condition : cfg.conditions) {
    switch (condition.kind) {
      case context::ConditionKind::GoldOnly: gold = &condition; break;
      case context::ConditionKind::Hard: hard.push_back(&condition); break;
      case context::ConditionKind::FarControl: far.push_back(&condition); break;
    }
  }
  std::sort(hard.begin(), hard.end(), [](const auto* a, const auto* b) {
    return a->hard_count < b->hard_count;
  });

  std::map<std::string, metrics::AggregateScores> agg_by_condition;
  for (const auto& [name, group] : by_condition) {
    agg_by_condition[name] = metrics::aggregate(group);
  }

  // retention.csv + half_life.csv
  std::string retention_csv = "metric,h,value,retention\n";
  std::string half_life_csv = "metric,half_life\n";
  if (gold == nullptr || agg_by_condition.count(gold->name()) == 0) {
    notes.push_back(
        "no gold_only scores; retention and half-life were not computed");
  } else {
    const auto& gold_agg = agg_by_condition.at(gold->name());
    size_t h_max = 0;
    for (const auto* condition : hard) {
      h_max = std::max(h_max, condition->hard_count);
    }
    for (const auto& metric : metric_names) {
      const double baseline = metric_of(gold_agg, metric);
      if (!(baseline > 0.0)) {
        notes.push_back("degenerate baseline M(0) = 0 for " + metric +
                        "; retention not defined");
        continue;
      }
      std::vector<std::pair<size_t, double>> points{{0, baseline}};
      for (const auto* condition : hard) {
        auto it = agg_by_condition.find(condition->name());
        if (it == agg_by_condition.end()) continue;
        points.emplace_back(condition->hard_count,
                            metric_of(it->second, metric));
      }
      const analysis::RetentionCurve curve =
          analysis::retention(metric, points, baseline);
      for (const auto& point : curve.points) {
        retention_csv += metric + "," + std::to_string(point.h) + "," +
                         fmt_double(point.value) + "," +
                         fmt_double(point.retention) + "\n";
      }
      if (points.size() > 1) {
        const analysis::HalfLife hl = analysis::half_life(curve, h_max);
        half_life_csv += metric + "," + hl.value_string() + "\n";
      }
    }
    if (hard.empty()) {
      notes.push_back("no hard conditions; half-life was not estimated");
    }
  }
  write_file(fs::path(out_dir) / "retention.csv", retention_csv);
  write_file(fs::path(out_dir) / "half_life.csv", half_life_csv);

  // deltas.csv: far-control minus matched hard, per question.
  std::string deltas_csv = "metric,delta,ci_low,ci_high,p,n\n";
  if (far.empty()) {
    notes.push_back("no far_control condition; paired deltas were not computed");
  }
  for (const auto* far_condition : far) {
    const size_t load = far_condition->hard_count + far_condition->far_count;
    const context::ConditionSpec* mate = nullptr;
    for (const auto* candidate : hard) {
      if (candidate->hard_count == load) mate = candidate;
    }
    if (mate == nullptr) {
      notes.push_back("no hard condition with H=" + std::to_string(load) +
                      " to pair with " + far_condition->name() +
                      "; paired deltas were not computed");
      continue;
    }
    auto far_it = by_condition.find(far_condition->name());
    auto hard_it = by_condition.find(mate->name());
    if (far_it == by_condition.end() || hard_it == by_condition.end()) {
      notes.push_back("missing scores for " + far_condition->name() + " or " +
                      mate->name() + "; paired deltas were not computed");
      continue;
    }
    std::map<std::string, const metrics::ScoreRecord*> hard_by_question;
    for (const auto& rec : hard_it->second) {
      if (!hard_by_question.emplace(rec.question_id, &rec).second) {
        fail(ErrorKind::DataIntegrity,
             "duplicate score for question " + rec.question_id + " under " +
                 mate->name());
      }
    }
    std::vector<std::pair<const metrics::ScoreRecord*,
                          const metrics::ScoreRecord*>> pairs;
    for (const auto& rec : far_it->second) {
      auto it = hard_by_question.find(rec.question_id);
      if (it != hard_by_question.end()) pairs.emplace_back(&rec, it->second);
    }
    if (pairs.size() < 2) {
      notes.push_back("fewer than 2 common questions between " +
                      far_condition->name() + " and " + mate->name() +
                      "; paired deltas were not computed");
      continue;
    }
    if (pairs.size() < far_it->second.size() ||
        pairs.size() < hard_it->second.size()) {
      notes.push_back(std::to_string(pairs.size()) +
                      " questions paired between " + far_condition->name() +
                      " and " + mate->name() + " (others lacked both scores)");
    }
    for (const auto& metric : metric_names) {
      std::vector<double> deltas;
      deltas.reserve(pairs.size());
      for (const auto& [f, h] : pairs) {
        if (metric == "em") {
          deltas.push_back(100.0 * (f->em - h->em));
        } else if (metric == "inclusion") {
          deltas.push_back(100.0 * (f->inclusion - h->inclusion));
        } else {
          deltas.push_back(f->f1 - h->f1);
        }
      }
      analysis::SignFlipOptions flip;
      flip.exact_n_max = cfg.analysis.exact_n_max;
      flip.mc_draws = cfg.analysis.mc_draws;
      flip.seed = derive_seed(
          cfg.seed, "signflip:" + far_condition->name() + ":" + metric);
      const analysis::PairedDelta pd = analysis::paired_delta(
          metric, deltas, cfg.analysis.bootstrap_resamples,
          derive_seed(cfg.seed,
                      "bootstrap:" + far_condition->name() + ":" + metric),
          flip);
      deltas_csv += metric + "," + fmt_double(pd.delta) + "," +
                    fmt_double(pd.ci_low) + "," + fmt_double(pd.ci_high) + "," +
                    fmt_double(pd.p) + "," + std::to_string(pd.n) + "\n";
    }
  }
  write_file(fs::path(out_dir) / "deltas.csv", deltas_csv);

  const fs::path notes_path = fs::path(out_dir) / "analysis_notes.txt";
  if (notes.empty()) {
    std::error_code ec;
    fs::remove(notes_path, ec);
  } else {
    std::string text;
    for (const auto& note : notes) text += note + "\n";
    write_file(notes_path, text);
  }

  write_manifest(cfg, out_dir, "analyze");
  std::fprintf(stderr, "[analyze] %zu score rows, %zu notes\n", records.size(),
               notes.size());
}

namespace {

std::string render_retention_svg(const Csv& retention) {
  struct Point {
    std::string h_text, r_text;
    double h, r;
    std::string metric;
  };
  std::vector<std::string> metric_order;
  std::map<std::string, std::vector<Point>> series;
  double max_h = 0.0, max_r = 1.0;
  for (const auto& row : retention.rows) {
    Point pt;
    pt.metric = row[0];
    pt.h_text = row[1];
    pt.r_text = row[3];
    pt.h = parse_double(row[1], "retention.csv h");
    pt.r = parse_double(row[3], "retention.csv retention");
    max_h = std::max(max_h, pt.h);
    max_r = std::max(max_r, pt.r);
    if (series.find(pt.metric) == series.end()) {
      metric_order.push_back(pt.metric);
    }
    series[pt.metric].push_back(pt);
  }

  const double width = 640, height = 400;
  const double ml = 60, mt = 24, mr = 24, mb = 52;
  const double pw = width - ml - mr, ph = height - mt - mb;
  const auto x_of = [&](double h) {
    return ml + (max_h > 0 ? h / max_h * pw : 0.0);
  };
  const auto y_of = [&](double r) { return mt + (1.0 - r / max_r) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"400\" viewBox=\"0 0 640 400\" font-family=\"sans-serif\" "
         "font-size=\"12\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt_fixed(ml, 0) + "\" y=\"15\" font-size=\"14\">"
         "Retention vs. hard-negative load</text>\n";

  // axes
  svg += "<line x1=\"" + fmt_fixed(ml, 1) + "\" y1=\"" + fmt_fixed(mt, 1) +
         "\" x2=\"" + fmt_fixed(ml, 1) + "\" y2=\"" + fmt_fixed(mt + ph, 1) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt_fixed(ml, 1) + "\" y1=\"" + fmt_fixed(mt + ph, 1) +
         "\" x2=\"" + fmt_fixed(ml + pw, 1) + "\" y2=\"" +
         fmt_fixed(mt + ph, 1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double r = max_r * i / 4.0;
    const double y = y_of(r);
    svg += "<line x1=\"" + fmt_fixed(ml - 4, 1) + "\" y1=\"" + fmt_fixed(y, 1) +
           "\" x2=\"" + fmt_fixed(ml, 1) + "\" y2=\"" + fmt_fixed(y, 1) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt_fixed(ml - 8, 1) + "\" y=\"" +
           fmt_fixed(y + 4, 1) + "\" text-anchor=\"end\">" + fmt_fixed(r, 2) +
           "</text>\n";
  }
  if (max_r >= 0.5) {
    const double y = y_of(0.5);
    svg += "<line x1=\"" + fmt_fixed(ml, 1) + "\" y1=\"" + fmt_fixed(y, 1) +
           "\" x2=\"" + fmt_fixed(ml + pw, 1) + "\" y2=\"" + fmt_fixed(y, 1) +
           "\" stroke=\"#999999\" stroke-dasharray=\"5,4\"/>\n";
  }
  std::vector<std::string> h_ticks;
  for (const auto& row : retention.rows) {
    if (std::find(h_ticks.begin(), h_ticks.end(), row[1]) == h_ticks.end()) {
      h_ticks.push_back(row[1]);
    }
  }
  for (const auto& tick : h_ticks) {
    const double h = parse_double(tick, "retention.csv h");
    const double x = x_of(h);
    svg += "<line x1=\"" + fmt_fixed(x, 1) + "\" y1=\"" + fmt_fixed(mt + ph, 1) +
           "\" x2=\"" + fmt_fixed(x, 1) + "\" y2=\"" +
           fmt_fixed(mt + ph + 4, 1) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt_fixed(x, 1) + "\" y=\"" +
           fmt_fixed(mt + ph + 18, 1) + "\" text-anchor=\"middle\">" + tick +
           "</text>\n";
  }
  svg += "<text x=\"" + fmt_fixed(ml + pw / 2, 1) + "\" y=\"" +
         fmt_fixed(height - 14, 1) +
         "\" text-anchor=\"middle\">hard negatives H</text>\n";
  svg += "<text x=\"16\" y=\"" + fmt_fixed(mt + ph / 2, 1) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt_fixed(mt + ph / 2, 1) + ")\">retention M(H)/M(0)</text>\n";

  double legend_y = mt + 16;
  for (const auto& metric : metric_order) {
    const auto& points = series[metric];
    std::string polyline;
    for (const auto& pt : points) {
      polyline += fmt_fixed(x_of(pt.h), 1) + "," + fmt_fixed(y_of(pt.r), 1) + " ";
    }
    if (!polyline.empty()) polyline.pop_back();
    svg += "<polyline fill=\"none\" stroke=\"" +
           std::string(metric_color(metric)) + "\" stroke-width=\"1.5\" "
           "points=\"" + polyline + "\"/>\n";
    for (const auto& pt : points) {
      // data-h / data-retention carry the CSV cell text verbatim so the plot
      // can be checked against retention.csv without reformatting.
      svg += "<circle data-metric=\"" + metric + "\" data-h=\"" + pt.h_text +
             "\" data-retention=\"" + pt.r_text + "\" cx=\"" +
             fmt_fixed(x_of(pt.h), 1) + "\" cy=\"" + fmt_fixed(y_of(pt.r), 1) +
             "\" r=\"3.5\" fill=\"" + metric_color(metric) + "\"/>\n";
    }
    svg += "<rect x=\"" + fmt_fixed(ml + pw - 92, 1) + "\" y=\"" +
           fmt_fixed(legend_y - 9, 1) + "\" width=\"10\" height=\"10\" fill=\"" +
           metric_color(metric) + "\"/>\n";
    svg += "<text x=\"" + fmt_fixed(ml + pw - 78, 1) + "\" y=\"" +
           fmt_fixed(legend_y, 1) + "\">" + display_metric(metric) +
           "</text>\n";
    legend_y += 16;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

void stage_report(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  const fs::path dir(out_dir);
  require_artifact(dir / "aggregates.csv", "run");
  require_artifact(dir / "retention.csv", "analyze");
  require_artifact(dir / "half_life.csv", "analyze");
  require_artifact(dir / "deltas.csv", "analyze");

  const Csv aggregates = read_csv(dir / "aggregates.csv");
  const Csv retention = read_csv(dir / "retention.csv");
  const Csv half_life = read_csv(dir / "half_life.csv");
  const Csv deltas = read_csv(dir / "deltas.csv");

  std::string md;
  md += "# Context composition run\n\n";
  md += "- Reader: " + cfg.reader_label + " (" + cfg.reader_kind + ")\n";
  md += "- Questions sampled: " + std::to_string(cfg.n_questions) +
        " (seed " + std::to_string(cfg.seed) + ")\n";
  md += "- Snippet window: " + std::to_string(cfg.snippet_words) + " words\n";
  std::string condition_list;
  for (const auto& condition : cfg.conditions) {
    if (!condition_list.empty()) condition_list += ", ";
    condition_list += condition.name();
  }
  md += "- Conditions: " + condition_list + "\n\n";

  md += "## Aggregate scores\n\n";
  md += "| Condition | EM | Inclusion | F1 | Avg. prompt tokens | n |\n";
  md += "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& row : aggregates.rows) {
    md += "| " + display_condition(row[1]) + " | " +
          fmt_fixed(parse_double(row[2], "aggregates.csv em"), 1) + " | " +
          fmt_fixed(parse_double(row[3], "aggregates.csv inclusion"), 1) +
          " | " + fmt_fixed(parse_double(row[4], "aggregates.csv f1"), 3) +
          " | " +
          fmt_fixed(parse_double(row[5], "aggregates.csv tokens"), 1) + " | " +
          row[6] + " |\n";
  }
  md += "\n";

  if (!retention.rows.empty()) {
    md += "## Retention under hard-negative load\n\n";
    md += "| Metric | H | Value | Retention |\n";
    md += "|---|---:|---:|---:|\n";
    for (const auto& row : retention.rows) {
      md += "| " + display_metric(row[0]) + " | " + row[1] + " | " +
            fmt_fixed(parse_double(row[2], "retention.csv value"),
                      metric_digits(row[0])) +
            " | " +
            fmt_fixed(parse_double(row[3], "retention.csv retention"), 4) +
            " |\n";
    }
    md += "\n";
    if (!half_life.rows.empty()) {
      md += "Half-life of retention (smallest tested H at or below half the "
            "gold-only score; censored at the largest tested load):\n\n";
      for (const auto& row : half_life.rows) {
        const std::string& cell = row[1];
        const std::string rendered =
            cell.rfind('>', 0) == 0 ? "K_{1/2}" + cell : "K_{1/2}=" + cell;
        md += "- " + display_metric(row[0]) + ": " + rendered + "\n";
      }
      md += "\n";
    }
    md += "![Retention curve](retention.svg)\n\n";
  }

  md += "## Far-control vs. hard deltas\n\n";
  if (deltas.rows.empty()) {
    md += "No matched far-control/hard condition pair in this run, so paired "
          "deltas were not computed.\n\n";
  } else {
    md += "Positive deltas mean the far-rank control scores higher than the "
          "hard-negative condition at the same context size. EM and "
          "inclusion deltas are in percentage points; CIs are percentile "
          "bootstrap, p-values are two-sided sign-flip tests.\n\n";
    md += "| Metric | Delta | 95% CI | p | n |\n";
    md += "|---|---:|---:|---:|---:|\n";
    for (const auto& row : deltas.rows) {
      const int digits = metric_digits(row[0]);
      md += "| " + display_metric(row[0]) + " | " +
            fmt_signed(parse_double(row[1], "deltas.csv delta"), digits) +
            " | [" +
            fmt_fixed(parse_double(row[2], "deltas.csv ci_low"), digits) +
            ", " +
            fmt_fixed(parse_double(row[3], "deltas.csv ci_high"), digits) +
            "] | " + fmt_p(parse_double(row[4], "deltas.csv p")) + " | " +
            row[5] + " |\n";
    }
    md += "\n";
  }

  const fs::path notes_path = dir / "analysis_notes.txt";
  if (fs::exists(notes_path)) {
    const std::string notes = read_file(notes_path);
    if (!notes.empty()) {
      md += "## Notes\n\n";
      size_t start = 0;
      while (start < notes.size()) {
        size_t end = notes.find('\n', start);
        if (end == std::string::npos) end = notes.size();
        if (end > start) md += "- " + notes.substr(start, end - start) + "\n";
        start = end + 1;
      }
      md += "\n";
    }
  }

  write_file(dir / "report.md", md);
  write_file(dir / "retention.svg", render_retention_svg(retention));
  write_manifest(cfg, out_dir, "report");
  std::fprintf(stderr, "[report] wrote report.md and retention.svg\n");
}

}  // namespace ragcomp::experiment
