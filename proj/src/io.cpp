#include "ridgepred/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ridgepred/errors.hpp"

namespace ridgepred {

namespace {

using Eigen::Index;
namespace fs = std::filesystem;

constexpr char kMagic[8] = {'R', 'D', 'G', 'M', 'A', 'T', '0', '1'};

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  }
  return v;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, mode | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(path, mode);
  if (!f) throw IoError("cannot read " + path.string());
  return f;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string where(const fs::path& path, int line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

double parse_at(const std::string& token, const fs::path& path, int line) {
  try {
    return parse_double(token);
  } catch (const IoError& e) {
    throw IoError(where(path, line) + e.what());
  }
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Lines of a CSV file after a header that must equal `header`.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header,
                                               std::size_t columns) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || trim(line) != header)
    throw IoError(where(path, 1) + "expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  for (int ln = 2; std::getline(f, line); ++ln) {
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != columns)
      throw IoError(where(path, ln) + "expected " + std::to_string(columns) + " fields");
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t == "nan" || t == "-nan" || t == "NaN") return std::nan("");
  if (t == "inf" || t == "+inf") return HUGE_VAL;
  if (t == "-inf") return -HUGE_VAL;
  const char* b = t.data();
  if (!t.empty() && t[0] == '+') ++b;
  double v = 0.0;
  const auto r = std::from_chars(b, t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw IoError("'" + t + "' is not a number");
  return v;
}

void write_matrix_binary(const fs::path& path, const Eigen::MatrixXd& m) {
  auto f = open_out(path, std::ios::binary);
  f.write(kMagic, 8);
  const std::uint64_t dims[2] = {to_le(std::uint64_t(m.rows())), to_le(std::uint64_t(m.cols()))};
  f.write(reinterpret_cast<const char*>(dims), sizeof dims);
  std::vector<std::uint64_t> row(m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      row[j] = to_le(bits);
    }
    f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * 8));
  }
  if (!f) throw IoError("failed writing " + path.string());
}

Eigen::MatrixXd read_matrix_binary(const fs::path& path) {
  auto f = open_in(path, std::ios::binary);
  char magic[8];
  std::uint64_t dims[2];
  if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError(path.string() + ": not a dense binary matrix (bad magic)");
  if (!f.read(reinterpret_cast<char*>(dims), sizeof dims))
    throw IoError(path.string() + ": truncated header");
  const std::uint64_t rows = to_le(dims[0]), cols = to_le(dims[1]);
  const auto size = fs::file_size(path);
  if (cols != 0 && rows > (size - 24) / 8 / cols)
    throw IoError(path.string() + ": file is shorter than its header claims");
  if (size != 24 + rows * cols * 8)
    throw IoError(path.string() + ": file size does not match its header");
  Eigen::MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<std::uint64_t> row(cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    if (!f.read(reinterpret_cast<char*>(row.data()), std::streamsize(cols * 8)))
      throw IoError(path.string() + ": truncated data");
    for (std::uint64_t j = 0; j < cols; ++j) {
      const std::uint64_t bits = to_le(row[j]);
      double v;
      std::memcpy(&v, &bits, 8);
      m(Index(i), Index(j)) = v;
    }
  }
  return m;
}

std::vector<double> read_reals_text(const fs::path& path) {
  auto f = open_in(path);
  std::vector<double> out;
  std::string line;
  for (int ln = 1; std::getline(f, line); ++ln) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.push_back(parse_at(t, path, ln));
  }
  return out;
}

void write_reals_text(const fs::path& path, const std::vector<double>& values) {
  auto f = open_out(path);
  for (double v : values) f << format_double(v) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

std::vector<StudySummary> read_summary_panel(const fs::path& path) {
  auto f = open_in(path);
  std::string line;
  int ln = 0;
  std::vector<std::string> head;
  while (head.empty() && std::getline(f, line)) {
    ++ln;
    const std::string t = trim(line);
    if (!t.empty() && t[0] != '#') head = split_ws(t);
  }
  if (head.empty()) throw IoError(path.string() + ": empty summary panel");
  if (head.front() == "n") head.erase(head.begin());
  std::vector<StudySummary> studies;
  for (const auto& tok : head) {
    const double n = parse_at(tok, path, ln);
    if (!(n >= 1.0) || n != std::floor(n))
      throw IoError(where(path, ln) + "study sample sizes must be positive integers");
    studies.push_back({Eigen::VectorXd(), Index(n)});
  }
  std::vector<std::vector<double>> cols(studies.size());
  while (std::getline(f, line)) {
    ++ln;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto toks = split_ws(t);
    if (toks.size() != studies.size())
      throw IoError(where(path, ln) + "expected " + std::to_string(studies.size()) +
                    " coefficients");
    for (std::size_t k = 0; k < toks.size(); ++k) cols[k].push_back(parse_at(toks[k], path, ln));
  }
  if (cols.front().empty()) throw IoError(path.string() + ": no coefficient rows");
  for (std::size_t k = 0; k < studies.size(); ++k)
    studies[k].beta_hat = Eigen::Map<const Eigen::VectorXd>(cols[k].data(), Index(cols[k].size()));
  return studies;
}

void write_summary_panel(const fs::path& path, const std::vector<StudySummary>& s) {
  if (s.empty()) throw ContractError("no studies to write");
  auto f = open_out(path);
  f << 'n';
  for (const auto& st : s) f << ' ' << st.n;
  f << '\n';
  for (Index j = 0; j < s.front().beta_hat.size(); ++j) {
    for (std::size_t k = 0; k < s.size(); ++k)
      f << (k ? " " : "") << format_double(s[k].beta_hat(j));
    f << '\n';
  }
  if (!f) throw IoError("failed writing " + path.string());
}

void write_series_csv(const fs::path& path, const std::vector<SeriesPoint>& pts) {
  auto f = open_out(path);
  f << "series,x,y,y_se\n";
  for (const auto& p : pts)
    f << csv_field(p.series) << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
      << format_double(p.y_se) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

std::vector<SeriesPoint> read_series_csv(const fs::path& path) {
  std::vector<SeriesPoint> out;
  int ln = 1;
  for (const auto& r : read_csv(path, "series,x,y,y_se", 4)) {
    ++ln;
    out.push_back({r[0], parse_at(r[1], path, ln), parse_at(r[2], path, ln),
                   parse_at(r[3], path, ln)});
  }
  return out;
}

static const char* kRowsHeader =
    "estimator,lambda_or_tau,replicate,a2,e2,mse_total,bias_sq,variance";

void write_metric_rows_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
  auto f = open_out(path);
  f << kRowsHeader << '\n';
  for (const auto& r : rows)
    f << csv_field(r.estimator) << ',' << format_double(r.lambda_or_tau) << ',' << r.replicate
      << ',' << format_double(r.a2) << ',' << format_double(r.e2) << ','
      << format_double(r.mse_total) << ',' << format_double(r.bias_sq) << ','
      << format_double(r.variance) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

std::vector<MetricRow> read_metric_rows_csv(const fs::path& path) {
  std::vector<MetricRow> out;
  int ln = 1;
  for (const auto& r : read_csv(path, kRowsHeader, 8)) {
    ++ln;
    MetricRow m;
    m.estimator = r[0];
    m.lambda_or_tau = parse_at(r[1], path, ln);
    m.replicate = int(parse_at(r[2], path, ln));
    m.a2 = parse_at(r[3], path, ln);
    m.e2 = parse_at(r[4], path, ln);
    m.mse_total = parse_at(r[5], path, ln);
    m.bias_sq = parse_at(r[6], path, ln);
    m.variance = parse_at(r[7], path, ln);
    out.push_back(std::move(m));
  }
  return out;
}

void write_comparison_csv(const fs::path& path, const LimitComparisonReport& report) {
  auto f = open_out(path);
  f << "estimator,lambda_or_tau,metric,empirical_mean,empirical_se,limit,gap,tolerance,status,"
       "note\n";
  for (const auto& e : report.entries)
    f << csv_field(e.estimator) << ',' << format_double(e.lambda_or_tau) << ',' << e.metric << ','
      << format_double(e.empirical_mean) << ',' << format_double(e.empirical_se) << ','
      << format_double(e.limit) << ',' << format_double(e.gap) << ','
      << format_double(e.tolerance) << ',' << to_string(e.status) << ',' << csv_field(e.note)
      << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  auto f = open_out(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const fs::path& path) {
  auto f = open_in(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace ridgepred
