#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fsu/data/sequence.hpp"

namespace fsu::data {

enum class Split { kBase, kNovel };

const char* split_name(Split s);
Split parse_split(const std::string& s);

struct ClassInfo {
  int label = 0;
  std::string name;
  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

struct ManifestEntry {
  std::string video_id;
  int class_label = 0;
  std::string feature_file;  // relative to the manifest's directory
  std::vector<Interval> gt_intervals;
  std::string roles;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// A dataset split. On disk this is JSON Lines: a header object
//   {"format":"fsu-manifest","version":1,"split":...,"classes":[...]}
// followed by one object per video
//   {"video_id":...,"class_label":...,"features":...,"gt":[[s,e],...],
//    "roles":"..."}
struct DatasetManifest {
  Split split = Split::kBase;
  std::vector<ClassInfo> classes;
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory feature paths resolve against

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.split == b.split && a.classes == b.classes && a.entries == b.entries;
  }
};

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Loads every entry's SEGF file.
std::vector<SegmentFeatureSequence> load_sequences(
    const DatasetManifest& manifest);

// Throws when the two label sets intersect.
void check_disjoint(const DatasetManifest& base, const DatasetManifest& novel);

}  // namespace fsu::data
