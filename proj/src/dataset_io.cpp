#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "hydg/dyngraph.hpp"
#include "hydg/error.hpp"

namespace hydg {
namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const auto* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

// Line-numbered reader: every error it raises names the file and line.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!trim(line).empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_.string(), line_no_, what);
  }

  std::size_t line() const { return line_no_; }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

std::string slice_file(const char* stem, std::size_t t, const char* ext) {
  return std::string(stem) + "_" + std::to_string(t) + ext;
}

std::vector<std::pair<std::size_t, std::size_t>> read_edges(const fs::path& path) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  LineReader r(path);
  std::string line;
  while (r.next(line)) {
    const auto tok = split_ws(line);
    std::size_t u = 0, v = 0;
    if (tok.size() != 2 || !parse_number(tok[0], u) || !parse_number(tok[1], v)) {
      r.fail("expected 'u v'");
    }
    edges.emplace_back(u, v);
  }
  return edges;
}

DenseMatrix read_features(const fs::path& path, std::size_t n, std::size_t d) {
  DenseMatrix f(n, d);
  LineReader r(path);
  std::string line;
  std::size_t row = 0;
  while (r.next(line)) {
    if (row >= n) r.fail("more than " + std::to_string(n) + " feature rows");
    const auto tok = split_on(line, ',');
    if (tok.size() != d) {
      r.fail("expected " + std::to_string(d) + " values, got " + std::to_string(tok.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (!parse_number(tok[j], f(row, j))) r.fail("bad real '" + std::string(tok[j]) + "'");
    }
    ++row;
  }
  if (row != n) throw SchemaError(path.string() + ": " + std::to_string(row) + " feature rows, n=" +
                                  std::to_string(n));
  return f;
}

std::vector<int> read_labels(const fs::path& path, std::size_t n, std::size_t classes) {
  std::vector<int> labels;
  labels.reserve(n);
  LineReader r(path);
  std::string line;
  while (r.next(line)) {
    const auto tok = trim(line);
    if (tok == "?") {
      labels.push_back(kUnknownLabel);
      continue;
    }
    int y = 0;
    if (!parse_number(tok, y)) r.fail("expected class id or '?'");
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      r.fail("class " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
    labels.push_back(y);
  }
  if (labels.size() != n) {
    throw SchemaError(path.string() + ": " + std::to_string(labels.size()) + " labels, n=" +
                      std::to_string(n));
  }
  return labels;
}

std::vector<bool> read_presence(const fs::path& path, std::size_t n) {
  std::vector<bool> presence;
  presence.reserve(n);
  LineReader r(path);
  std::string line;
  while (r.next(line)) {
    const auto tok = trim(line);
    if (tok == "1") {
      presence.push_back(true);
    } else if (tok == "0") {
      presence.push_back(false);
    } else {
      r.fail("expected 0 or 1");
    }
  }
  if (presence.size() != n) {
    throw SchemaError(path.string() + ": " + std::to_string(presence.size()) + " flags, n=" +
                      std::to_string(n));
  }
  return presence;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

DynamicGraph load_dataset(const fs::path& dir, const LoadOptions& options) {
  std::size_t n = 0, d = 0, classes = 0, slices = 0;
  bool synthesize = false;
  {
    LineReader r(dir / "meta");
    std::string line;
    if (!r.next(line)) r.fail("empty meta file");
    const auto tok = split_ws(line);
    if (tok.size() != 4) r.fail("expected 'n d C T'");
    if (!parse_number(tok[0], n)) r.fail("bad node count");
    if (tok[1] == "-") {
      synthesize = true;
    } else if (!parse_number(tok[1], d)) {
      r.fail("bad attribute count");
    }
    if (!parse_number(tok[2], classes) || classes == 0) r.fail("bad class count");
    if (!parse_number(tok[3], slices) || slices == 0) r.fail("bad slice count");
    synthesize = synthesize || d == 0;
  }
  if (synthesize) d = options.degree_buckets;

  std::vector<SnapshotGraph> snaps;
  snaps.reserve(slices);
  for (std::size_t t = 0; t < slices; ++t) {
    SnapshotGraph s;
    s.t = t;
    const fs::path presence_path = dir / slice_file("presence", t, ".txt");
    s.presence = fs::exists(presence_path) ? read_presence(presence_path, n)
                                           : std::vector<bool>(n, true);
    s.adjacency = adjacency_from_edges(n, read_edges(dir / slice_file("edges", t, ".txt")));
    s.labels = read_labels(dir / slice_file("labels", t, ".txt"), n, classes);
    const fs::path feat_path = dir / slice_file("feat", t, ".csv");
    if (synthesize) {
      if (fs::exists(feat_path)) {
        throw SchemaError(feat_path.string() + ": meta declares no attributes");
      }
      s.features = degree_bucket_features(s.adjacency, d);
    } else {
      if (!fs::exists(feat_path)) {
        throw SchemaError(feat_path.string() + ": missing, meta declares d=" + std::to_string(d));
      }
      s.features = read_features(feat_path, n, d);
    }
    snaps.push_back(std::move(s));
  }
  return DynamicGraph(n, d, classes, std::move(snaps));
}

void save_dataset(const DynamicGraph& g, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    auto out = open_out(dir / "meta");
    out << g.nodes() << ' ' << g.attributes() << ' ' << g.classes() << ' ' << g.slices() << '\n';
  }
  char buf[40];
  for (const auto& s : g.snapshots()) {
    {
      auto out = open_out(dir / slice_file("edges", s.t, ".txt"));
      for (const auto& e : s.adjacency.triplets()) {
        if (e.row < e.col) out << e.row << ' ' << e.col << '\n';
      }
    }
    {
      auto out = open_out(dir / slice_file("feat", s.t, ".csv"));
      for (std::size_t i = 0; i < s.features.rows(); ++i) {
        const auto row = s.features.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
          std::snprintf(buf, sizeof buf, "%.17g", row[j]);
          out << (j ? "," : "") << buf;
        }
        out << '\n';
      }
    }
    {
      auto out = open_out(dir / slice_file("labels", s.t, ".txt"));
      for (int y : s.labels) {
        if (y == kUnknownLabel) {
          out << "?\n";
        } else {
          out << y << '\n';
        }
      }
    }
    {
      auto out = open_out(dir / slice_file("presence", s.t, ".txt"));
      for (bool p : s.presence) out << (p ? "1\n" : "0\n");
    }
  }
}

}  // namespace hydg
