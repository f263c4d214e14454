#include "retigraph/config.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"

namespace retigraph {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

TomlValue parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw FormatError("config line " + std::to_string(line_no) + ": unterminated string");
    std::string out;
    for (size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        ++i;
        out += v[i] == 'n' ? '\n' : v[i];
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  const bool is_float = v.find_first_of(".eE") != std::string::npos &&
                        v.find_first_not_of("+-0123456789.eE") == std::string::npos;
  try {
    size_t used = 0;
    if (is_float) {
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } else {
      const int64_t i = std::stoll(v, &used, 10);
      if (used == v.size()) return i;
    }
  } catch (...) {
  }
  throw FormatError("config line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string section;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t end = std::min(text.find('\n', pos), text.size());
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    // Strip comments outside quotes.
    bool in_quote = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quote = !in_quote;
      if (line[i] == '#' && !in_quote) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError("config line " + std::to_string(line_no) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw FormatError("config line " + std::to_string(line_no) + ": empty section name");
      table[section];
      if (end == text.size()) break;
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw FormatError("config line " + std::to_string(line_no) + ": empty key");
    if (table[section].count(key))
      throw FormatError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    table[section][key] = parse_value(line.substr(eq + 1), line_no);
    if (end == text.size()) break;
  }
  return table;
}

namespace {

class StrictReader {
 public:
  explicit StrictReader(const TomlTable& table) : table_(table) {}

  template <typename T>
  void read(const std::string& section, const std::string& key, T& out) {
    seen_[section];  // sections become known once any key of theirs is declared
    seen_[section].insert(key);
    auto sit = table_.find(section);
    if (sit == table_.end()) return;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return;
    assign(kit->second, out, section + "." + key);
  }

  void finish() const {
    for (const auto& [section, keys] : table_) {
      auto sit = seen_.find(section);
      if (sit == seen_.end())
        throw FormatError("config: unknown section [" + section + "]");
      for (const auto& [key, value] : keys)
        if (!sit->second.count(key))
          throw FormatError("config: unknown key '" + section + "." + key + "'");
    }
  }

 private:
  static void assign(const TomlValue& v, double& out, const std::string& where) {
    if (std::holds_alternative<double>(v))
      out = std::get<double>(v);
    else if (std::holds_alternative<int64_t>(v))
      out = static_cast<double>(std::get<int64_t>(v));
    else
      throw FormatError("config: " + where + " must be a number");
  }
  static void assign(const TomlValue& v, int& out, const std::string& where) {
    if (!std::holds_alternative<int64_t>(v))
      throw FormatError("config: " + where + " must be an integer");
    out = static_cast<int>(std::get<int64_t>(v));
  }
  static void assign(const TomlValue& v, uint64_t& out, const std::string& where) {
    if (!std::holds_alternative<int64_t>(v) || std::get<int64_t>(v) < 0)
      throw FormatError("config: " + where + " must be a non-negative integer");
    out = static_cast<uint64_t>(std::get<int64_t>(v));
  }
  static void assign(const TomlValue& v, bool& out, const std::string& where) {
    if (!std::holds_alternative<bool>(v))
      throw FormatError("config: " + where + " must be a boolean");
    out = std::get<bool>(v);
  }
  static void assign(const TomlValue& v, std::string& out, const std::string& where) {
    if (!std::holds_alternative<std::string>(v))
      throw FormatError("config: " + where + " must be a string");
    out = std::get<std::string>(v);
  }

  const TomlTable& table_;
  std::map<std::string, std::set<std::string>> seen_;
};

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& toml_text) {
  const TomlTable table = parse_toml(toml_text);
  PipelineConfig cfg;
  StrictReader reader(table);

  reader.read("pipeline", "pixel_size_mm", cfg.pixel_size_mm);
  reader.read("pipeline", "threshold", cfg.threshold);
  reader.read("pipeline", "include_coords", cfg.include_coords);

  reader.read("model", "hidden_dim", cfg.model.hidden_dim);
  reader.read("model", "message_passing_layers", cfg.model.message_passing_layers);
  reader.read("model", "dropout_rate", cfg.model.dropout_rate);
  reader.read("model", "neighbor_aggregator", cfg.model.neighbor_aggregator);
  reader.read("model", "relation_aggregator", cfg.model.relation_aggregator);

  reader.read("train", "epochs", cfg.train.epochs);
  reader.read("train", "batch_size", cfg.train.batch_size);
  reader.read("train", "learning_rate", cfg.train.learning_rate);
  reader.read("train", "weight_decay", cfg.train.weight_decay);
  reader.read("train", "seed", cfg.train.seed);
  reader.read("train", "folds", cfg.train.folds);
  reader.read("train", "val_fold", cfg.train.val_fold);

  reader.read("explain", "k", cfg.explain_k);
  reader.read("explain", "steps", cfg.explain_steps);

  reader.read("synth", "size", cfg.synth_size);
  reader.read("synth", "mesh_spacing", cfg.synth_mesh_spacing);

  reader.finish();

  if (cfg.pixel_size_mm <= 0.0) throw FormatError("config: pixel_size_mm must be positive");
  if (cfg.threshold < 0.0 || cfg.threshold > 1.0)
    throw FormatError("config: threshold must be in [0,1]");
  if (cfg.explain_k < 1) throw FormatError("config: explain.k must be >= 1");
  if (cfg.explain_steps < 8) throw FormatError("config: explain.steps must be >= 8");
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  return parse_pipeline_config(read_file_text(path));
}

}  // namespace retigraph
