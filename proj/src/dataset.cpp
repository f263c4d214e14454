#include "retigraph/dataset.hpp"

#include <filesystem>

#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"

namespace retigraph {

namespace fs = std::filesystem;

std::vector<LabelRow> load_labels_csv(const std::string& path) {
  const std::string text = read_file_text(path);
  std::vector<LabelRow> rows;
  size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      if (line != "id,label,group")
        throw FormatError("labels.csv must start with header 'id,label,group'");
      header = false;
      continue;
    }
    const size_t c1 = line.find(',');
    const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw FormatError("labels.csv row needs three fields: " + line);
    rows.push_back({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), line.substr(c2 + 1)});
  }
  if (header) throw FormatError("labels.csv is empty");
  return rows;
}

void save_labels_csv(const std::vector<LabelRow>& rows, const std::string& path) {
  std::string out = "id,label,group\r\n";
  for (const LabelRow& r : rows) out += r.id + "," + r.label + "," + r.group + "\r\n";
  write_file_atomic(path, out);
}

void write_dataset(const std::vector<DatasetSample>& samples, const std::string& dir,
                   bool with_graphs, double threshold, bool include_coords) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "segs");
  if (with_graphs) fs::create_directories(fs::path(dir) / "graphs");

  std::vector<LabelRow> rows;
  for (const DatasetSample& ds : samples) {
    save_pgm(ds.sample.img, (fs::path(dir) / "images" / (ds.image_id + ".pgm")).string());
    save_pgm(ds.sample.seg, (fs::path(dir) / "segs" / (ds.image_id + ".pgm")).string());
    if (with_graphs) {
      AssembleOptions opts;
      opts.image_id = ds.image_id;
      opts.group_id = ds.group_id;
      opts.include_coords = include_coords;
      (void)threshold;  // segs are already binary masks here
      HeteroGraph g = assemble(ds.sample.seg, ds.sample.img, opts);
      g.label = ds.sample.label;
      save_graph(g, (fs::path(dir) / "graphs" / (ds.image_id + ".json")).string());
    }
    rows.push_back({ds.image_id, class_label_name(ds.sample.label), ds.group_id});
  }
  save_labels_csv(rows, (fs::path(dir) / "labels.csv").string());
}

bool dataset_is_binary(const std::string& dir) {
  for (const LabelRow& r : load_labels_csv((fs::path(dir) / "labels.csv").string()))
    if (r.label == "DR") return true;
  return false;
}

std::vector<HeteroGraph> load_dataset_graphs(const std::string& dir, bool allow_binary) {
  const std::vector<LabelRow> rows = load_labels_csv((fs::path(dir) / "labels.csv").string());
  std::vector<HeteroGraph> graphs;
  for (const LabelRow& r : rows) {
    const std::string path = (fs::path(dir) / "graphs" / (r.id + ".json")).string();
    HeteroGraph g = load_graph(path);
    g.meta.image_id = r.id;
    g.meta.group_id = r.group;
    if (r.label == "DR") {
      if (!allow_binary)
        throw ArgumentError("binary DR label cannot feed 3-class training: " + r.id);
      g.label = ClassLabel::NPDR;  // stands in for "any DR" in binary evaluation
    } else {
      g.label = parse_class_label(r.label);
    }
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace retigraph
