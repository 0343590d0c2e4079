#include "fsu/data/manifest.hpp"

#include <fstream>
#include <set>

#include "fsu/data/segf.hpp"
#include "fsu/error.hpp"
#include "json.hpp"

namespace fsu::data {

using nlohmann::json;

const char* split_name(Split s) { return s == Split::kBase ? "base" : "novel"; }

Split parse_split(const std::string& s) {
  if (s == "base") return Split::kBase;
  if (s == "novel") return Split::kNovel;
  throw data_error("unknown split '" + s + "'");
}

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot open " + path.string() + " for writing");

  json header = {{"format", "fsu-manifest"},
                 {"version", 1},
                 {"split", split_name(manifest.split)}};
  json classes = json::array();
  for (const ClassInfo& c : manifest.classes) {
    classes.push_back({{"label", c.label}, {"name", c.name}});
  }
  header["classes"] = std::move(classes);
  out << header.dump() << '\n';

  for (const ManifestEntry& e : manifest.entries) {
    json gt = json::array();
    for (const Interval& iv : e.gt_intervals) gt.push_back({iv.start, iv.end});
    json rec = {{"video_id", e.video_id},
                {"class_label", e.class_label},
                {"features", e.feature_file},
                {"gt", std::move(gt)}};
    if (!e.roles.empty()) rec["roles"] = e.roles;
    out << rec.dump() << '\n';
  }
  if (!out) throw data_error("write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open manifest " + path.string());

  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::set<int> labels;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json rec = json::parse(line);
      if (!have_header) {
        if (rec.value("format", "") != "fsu-manifest") {
          throw data_error("missing fsu-manifest header");
        }
        if (rec.at("version").get<int>() != 1) {
          throw data_error("unsupported manifest version");
        }
        m.split = parse_split(rec.at("split").get<std::string>());
        for (const json& c : rec.at("classes")) {
          m.classes.push_back({c.at("label").get<int>(), c.at("name").get<std::string>()});
          labels.insert(m.classes.back().label);
        }
        have_header = true;
        continue;
      }
      ManifestEntry e;
      e.video_id = rec.at("video_id").get<std::string>();
      e.class_label = rec.at("class_label").get<int>();
      e.feature_file = rec.at("features").get<std::string>();
      for (const json& iv : rec.at("gt")) {
        e.gt_intervals.push_back({iv.at(0).get<std::size_t>(), iv.at(1).get<std::size_t>()});
      }
      e.roles = rec.value("roles", "");
      if (!labels.contains(e.class_label)) {
        throw data_error("class label " + std::to_string(e.class_label) +
                         " not declared in header");
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw data_error(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
  } catch (const Error& ex) {
    throw data_error(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
  }
  if (!have_header) throw data_error(path.string() + ": empty manifest");
  return m;
}

std::vector<SegmentFeatureSequence> load_sequences(
    const DatasetManifest& manifest) {
  std::vector<SegmentFeatureSequence> out;
  out.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    SegmentFeatureSequence seq;
    seq.video_id = e.video_id;
    seq.class_label = e.class_label;
    seq.features = read_feature_file(manifest.root / e.feature_file);
    seq.gt_intervals = e.gt_intervals;
    seq.roles = e.roles;
    seq.validate();
    out.push_back(std::move(seq));
  }
  return out;
}

void check_disjoint(const DatasetManifest& base, const DatasetManifest& novel) {
  std::set<int> seen;
  for (const ClassInfo& c : base.classes) seen.insert(c.label);
  for (const ClassInfo& c : novel.classes) {
    if (seen.contains(c.label)) {
      throw data_error("class label " + std::to_string(c.label) +
                       " appears in both base and novel splits");
    }
  }
}

}  // namespace fsu::data
