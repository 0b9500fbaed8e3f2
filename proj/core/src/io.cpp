#include "vbs/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>

#include <json.hpp>

namespace vbs::io {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string loc(const std::string& origin, int line) {
  return origin + ":" + std::to_string(line);
}

/// Walks a text buffer line by line, tracking 1-based line numbers for
/// error reports.
class LineReader {
 public:
  explicit LineReader(const std::string& text) : text_(text) {}

  std::optional<std::string_view> next() {
    if (pos_ >= text_.size()) return std::nullopt;
    const std::size_t start = pos_;
    const std::size_t nl = text_.find('\n', start);
    std::string_view line;
    if (nl == std::string::npos) {
      line = std::string_view(text_).substr(start);
      pos_ = text_.size();
    } else {
      line = std::string_view(text_).substr(start, nl - start);
      pos_ = nl + 1;
    }
    ++line_no_;
    return line;
  }

  /// Line number of the most recently returned line.
  int line_no() const { return line_no_; }
  /// Line number an upcoming line would get; used for missing-row reports.
  int next_line_no() const { return line_no_ + 1; }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_finite(std::string_view token, const std::string& origin, int line) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() ||
      !std::isfinite(value)) {
    raise(ErrorCode::NonFiniteValue,
          loc(origin, line) + ": '" + std::string(token) +
              "' is not a finite decimal");
  }
  return value;
}

long parse_integer(std::string_view token, const std::string& origin, int line) {
  long value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    raise(ErrorCode::MalformedHeader,
          loc(origin, line) + ": '" + std::string(token) + "' is not an integer");
  }
  return value;
}

/// Reads `rows` lines of exactly `cols` finite decimals into `out`.
void parse_rows(LineReader& reader, Matrix& out, const std::string& origin) {
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const auto line = reader.next();
    if (!line) {
      raise(ErrorCode::RowCountMismatch,
            loc(origin, reader.next_line_no()) + ": expected " +
                std::to_string(out.rows()) + " rows, file ends after " +
                std::to_string(r));
    }
    const auto tokens = split_tokens(*line);
    if (tokens.size() != out.cols()) {
      raise(ErrorCode::RowCountMismatch,
            loc(origin, reader.line_no()) + ": expected " +
                std::to_string(out.cols()) + " values, got " +
                std::to_string(tokens.size()));
    }
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(r, c) = parse_finite(tokens[c], origin, reader.line_no());
    }
  }
}

void reject_trailing(LineReader& reader, const std::string& origin) {
  while (const auto line = reader.next()) {
    if (!split_tokens(*line).empty()) {
      raise(ErrorCode::RowCountMismatch,
            loc(origin, reader.line_no()) + ": unexpected extra row");
    }
  }
}

std::vector<std::string_view> parse_header(LineReader& reader,
                                           const std::string& origin,
                                           std::string_view expect_tag,
                                           std::size_t expect_fields) {
  const auto line = reader.next();
  if (!line) raise(ErrorCode::MalformedHeader, loc(origin, 1) + ": empty file");
  const auto tokens = split_tokens(*line);
  if (tokens.size() != expect_fields || tokens[0] != expect_tag ||
      tokens[1] != "1") {
    raise(ErrorCode::MalformedHeader,
          loc(origin, 1) + ": expected '" + std::string(expect_tag) +
              " 1 ...' header");
  }
  return tokens;
}

void append_row(std::string& out, std::span<const double> row) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (c > 0) out += ' ';
    out += format_double(row[c]);
  }
  out += '\n';
}

std::string format_matrix(std::string_view tag, const Matrix& values) {
  std::string out = std::string(tag) + " 1 " + std::to_string(values.rows()) +
                    " " + std::to_string(values.cols()) + "\n";
  for (std::size_t r = 0; r < values.rows(); ++r) append_row(out, values.row(r));
  return out;
}

}  // namespace

std::string format_logits(const LogitMatrix& logits) {
  return format_matrix("VSL", logits.values());
}

std::string format_logits(const EnsembleLogits& logits) {
  return format_matrix("VSE", logits.values());
}

std::variant<LogitMatrix, EnsembleLogits> parse_logits(const std::string& text,
                                                       const std::string& origin) {
  LineReader reader(text);
  const auto line = reader.next();
  if (!line) raise(ErrorCode::MalformedHeader, loc(origin, 1) + ": empty file");
  const auto tokens = split_tokens(*line);
  if (tokens.size() != 4 || (tokens[0] != "VSL" && tokens[0] != "VSE") ||
      tokens[1] != "1") {
    raise(ErrorCode::MalformedHeader,
          loc(origin, 1) + ": expected 'VSL 1 <T> <K>' or 'VSE 1 <M> <K>'");
  }
  const long rows = parse_integer(tokens[2], origin, 1);
  const long cols = parse_integer(tokens[3], origin, 1);
  if (rows < 1 || cols < 2) {
    raise(ErrorCode::MalformedHeader,
          loc(origin, 1) + ": header dimensions out of range");
  }
  Matrix values(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  parse_rows(reader, values, origin);
  reject_trailing(reader, origin);
  if (tokens[0] == "VSL") {
    return LogitMatrix(std::move(values));
  }
  return EnsembleLogits(std::move(values));
}

void write_logits(const LogitMatrix& logits, const std::filesystem::path& path) {
  write_text_atomic(path, format_logits(logits));
}

void write_logits(const EnsembleLogits& logits, const std::filesystem::path& path) {
  write_text_atomic(path, format_logits(logits));
}

std::variant<LogitMatrix, EnsembleLogits> read_logits(const std::filesystem::path& path) {
  return parse_logits(read_text(path), path.string());
}

std::string format_dataset(const std::vector<SynthSample>& samples, int classes) {
  require(!samples.empty(), ErrorCode::EmptyDataset, "no samples to write");
  const Matrix& first = samples.front().patches;
  std::string out = "VSD 1 " + std::to_string(samples.size()) + " " +
                    std::to_string(first.rows()) + " " +
                    std::to_string(first.cols()) + " " + std::to_string(classes) +
                    "\n";
  for (const SynthSample& sample : samples) {
    require(sample.patches.rows() == first.rows() &&
                sample.patches.cols() == first.cols(),
            ErrorCode::ShapeError, "dataset samples disagree on patch shape");
    out += std::to_string(sample.label);
    out += '\n';
    for (std::size_t r = 0; r < sample.patches.rows(); ++r) {
      append_row(out, sample.patches.row(r));
    }
  }
  return out;
}

std::vector<SynthSample> parse_dataset(const std::string& text,
                                       const std::string& origin, int* classes_out) {
  LineReader reader(text);
  const auto header = parse_header(reader, origin, "VSD", 6);
  const long n = parse_integer(header[2], origin, 1);
  const long t = parse_integer(header[3], origin, 1);
  const long d = parse_integer(header[4], origin, 1);
  const long k = parse_integer(header[5], origin, 1);
  if (n < 1 || t < 1 || d < 1 || k < 2) {
    raise(ErrorCode::MalformedHeader,
          loc(origin, 1) + ": header dimensions out of range");
  }

  std::vector<SynthSample> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const auto label_line = reader.next();
    if (!label_line) {
      raise(ErrorCode::RowCountMismatch,
            loc(origin, reader.next_line_no()) + ": expected " +
                std::to_string(n) + " samples, file ends after " +
                std::to_string(i));
    }
    const auto tokens = split_tokens(*label_line);
    if (tokens.size() != 1) {
      raise(ErrorCode::RowCountMismatch,
            loc(origin, reader.line_no()) + ": expected a single label");
    }
    const long label = parse_integer(tokens[0], origin, reader.line_no());
    if (label < 0 || label >= k) {
      raise(ErrorCode::InvalidLabel,
            loc(origin, reader.line_no()) + ": label " + std::to_string(label) +
                " outside [0, " + std::to_string(k) + ")");
    }
    SynthSample sample;
    sample.label = static_cast<int>(label);
    sample.patches =
        Matrix(static_cast<std::size_t>(t), static_cast<std::size_t>(d));
    parse_rows(reader, sample.patches, origin);
    samples.push_back(std::move(sample));
  }
  reject_trailing(reader, origin);
  if (classes_out != nullptr) *classes_out = static_cast<int>(k);
  return samples;
}

void write_dataset(const std::vector<SynthSample>& samples, int classes,
                   const std::filesystem::path& path) {
  write_text_atomic(path, format_dataset(samples, classes));
}

std::vector<SynthSample> read_dataset(const std::filesystem::path& path,
                                      int* classes_out) {
  return parse_dataset(read_text(path), path.string(), classes_out);
}

std::string format_model(const PatchClassifier& model) {
  std::string out = "VSM 1 " + std::to_string(model.weights.rows()) + " " +
                    std::to_string(model.weights.cols()) + "\n";
  for (std::size_t r = 0; r < model.weights.rows(); ++r) {
    append_row(out, model.weights.row(r));
  }
  append_row(out, model.bias);
  return out;
}

PatchClassifier parse_model(const std::string& text, const std::string& origin) {
  LineReader reader(text);
  const auto header = parse_header(reader, origin, "VSM", 4);
  const long k = parse_integer(header[2], origin, 1);
  const long d = parse_integer(header[3], origin, 1);
  if (k < 2 || d < 1) {
    raise(ErrorCode::MalformedHeader,
          loc(origin, 1) + ": header dimensions out of range");
  }
  PatchClassifier model;
  model.weights =
      Matrix(static_cast<std::size_t>(k), static_cast<std::size_t>(d));
  parse_rows(reader, model.weights, origin);

  Matrix bias_row(1, static_cast<std::size_t>(k));
  parse_rows(reader, bias_row, origin);
  model.bias.assign(bias_row.data().begin(), bias_row.data().end());
  reject_trailing(reader, origin);
  return model;
}

void write_model(const PatchClassifier& model, const std::filesystem::path& path) {
  write_text_atomic(path, format_model(model));
}

PatchClassifier read_model(const std::filesystem::path& path) {
  return parse_model(read_text(path), path.string());
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const std::string origin = path.string();
  LineReader reader(text);
  std::vector<int> labels;
  while (const auto line = reader.next()) {
    const auto tokens = split_tokens(*line);
    if (tokens.empty()) continue;
    if (tokens.size() != 1) {
      raise(ErrorCode::RowCountMismatch,
            loc(origin, reader.line_no()) + ": expected one label per line");
    }
    labels.push_back(
        static_cast<int>(parse_integer(tokens[0], origin, reader.line_no())));
  }
  require(!labels.empty(), ErrorCode::EmptyInput, origin + ": no labels");
  return labels;
}

namespace {

std::string_view beta_policy_name(BetaPolicy::Kind kind) {
  switch (kind) {
    case BetaPolicy::Kind::Fixed: return "fixed";
    case BetaPolicy::Kind::MeanOffset: return "mean_offset";
    case BetaPolicy::Kind::NegPercentile: return "neg_percentile";
  }
  return "unknown";
}

BetaPolicy::Kind beta_policy_from_name(const std::string& name,
                                       const std::string& origin) {
  if (name == "fixed") return BetaPolicy::Kind::Fixed;
  if (name == "mean_offset") return BetaPolicy::Kind::MeanOffset;
  if (name == "neg_percentile") return BetaPolicy::Kind::NegPercentile;
  raise(ErrorCode::ConfigError, origin + ": unknown beta policy '" + name + "'");
}

bool is_smoothing_method(const std::string& method) {
  return method == "variance_smoothing" || method == "ensemble_smoothing";
}

}  // namespace

std::string calibration_to_json(const CalibrationRecord& record) {
  ordered_json j;
  j["method"] = record.method;
  if (is_smoothing_method(record.method)) {
    j["alpha"] = record.config.alpha;
    j["pool_kernel"] = record.config.pool_kernel;
    j["pool_stride"] = record.config.pool_stride;
    j["beta"] = record.beta.beta;
    j["beta_policy"] = beta_policy_name(record.beta.policy.kind);
    j["beta_param"] = record.beta.policy.param;
    j["validation"] = {{"n", record.beta.n_validation},
                       {"sigma_bar_mean", record.beta.validation_mean},
                       {"requested_percentile", record.beta.requested_percentile}};
  } else if (record.method == "temp_scaling") {
    j["temperature"] = record.temperature.t;
    j["final_nll"] = record.temperature.final_nll;
    j["iterations"] = record.temperature.iterations;
    j["at_bound"] = record.temperature.at_bound;
  }
  return j.dump(2) + "\n";
}

CalibrationRecord calibration_from_json(const std::string& text,
                                        const std::string& origin) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    raise(ErrorCode::ConfigError, origin + ": invalid JSON: " + e.what());
  }
  try {
    CalibrationRecord record;
    record.method = j.at("method").get<std::string>();
    if (is_smoothing_method(record.method)) {
      record.config.alpha = j.at("alpha").get<double>();
      record.config.pool_kernel = j.at("pool_kernel").get<int>();
      record.config.pool_stride = j.at("pool_stride").get<int>();
      record.beta.beta = j.at("beta").get<double>();
      record.beta.policy.kind = beta_policy_from_name(
          j.at("beta_policy").get<std::string>(), origin);
      record.beta.policy.param = j.at("beta_param").get<double>();
      const auto& val = j.at("validation");
      record.beta.n_validation = val.at("n").get<std::size_t>();
      record.beta.validation_mean = val.at("sigma_bar_mean").get<double>();
      record.beta.requested_percentile =
          val.at("requested_percentile").get<double>();
      record.config.beta_policy = record.beta.policy;
      record.config.validate();
    } else if (record.method == "temp_scaling") {
      record.temperature.t = j.at("temperature").get<double>();
      record.temperature.final_nll = j.at("final_nll").get<double>();
      record.temperature.iterations = j.at("iterations").get<int>();
      record.temperature.at_bound = j.at("at_bound").get<bool>();
      require(record.temperature.t > 0.0, ErrorCode::ConfigError,
              origin + ": temperature must be > 0");
    }
    return record;
  } catch (const ordered_json::exception& e) {
    raise(ErrorCode::ConfigError, origin + ": bad calibration record: " + e.what());
  }
}

std::string report_to_json(const CalibrationReport& report) {
  ordered_json j;
  j["n"] = report.n;
  j["accuracy"] = report.accuracy;
  j["ece"] = report.ece;
  j["brier"] = report.brier;
  j["mean_entropy"] = report.mean_entropy;
  j["mean_kl_to_uniform"] = report.mean_kl_to_uniform;
  j["entropy_log_base"] = "e";
  j["bins"] = ordered_json::array();
  for (const ReliabilityBin& bin : report.bins) {
    // NaN dumps as null, which is the undefined marker for empty bins.
    j["bins"].push_back({{"lo", bin.lo},
                         {"hi", bin.hi},
                         {"count", bin.count},
                         {"mean_confidence", bin.mean_confidence},
                         {"empirical_accuracy", bin.empirical_accuracy}});
  }
  return j.dump(2) + "\n";
}

std::string bins_to_csv(const std::vector<ReliabilityBin>& bins) {
  std::string csv = "bin_lo,bin_hi,count,mean_conf,accuracy\n";
  char line[160];
  for (const ReliabilityBin& bin : bins) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%zu,%.9g,%.9g\n", bin.lo, bin.hi,
                  bin.count, bin.mean_confidence, bin.empirical_accuracy);
    csv += line;
  }
  return csv;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  require(!in.bad(), ErrorCode::IoError, "failed reading " + path.string());
  return buffer.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::IoError, "cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    require(out.good(), ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::IoError,
          "cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace vbs::io
