#include "hwdnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "hwdnet/error.hpp"

namespace fs = std::filesystem;

namespace hwdnet {

std::string_view to_string(Modality m) { return m == Modality::rgb ? "rgb" : "ir"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
  }
  return "train";
}

std::string_view to_string(Direction d) { return d == Direction::ir2rgb ? "ir2rgb" : "rgb2ir"; }
std::string_view to_string(Shot s) { return s == Shot::single ? "single" : "multi"; }

Modality parse_modality(std::string_view text) {
  if (text == "rgb" || text == "RGB") return Modality::rgb;
  if (text == "ir" || text == "IR") return Modality::ir;
  throw ParseError("unknown modality '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "query") return Split::query;
  if (text == "gallery") return Split::gallery;
  throw ParseError("unknown split '" + std::string(text) + "'");
}

Direction parse_direction(std::string_view text) {
  if (text == "ir2rgb" || text == "IR2RGB") return Direction::ir2rgb;
  if (text == "rgb2ir" || text == "RGB2IR") return Direction::rgb2ir;
  throw ParseError("unknown direction '" + std::string(text) + "'");
}

Shot parse_shot(std::string_view text) {
  if (text == "single") return Shot::single;
  if (text == "multi") return Shot::multi;
  throw ParseError("unknown shot mode '" + std::string(text) + "'");
}

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

struct SidecarRow {
  std::int64_t identity;
  Modality modality;
  int orientation;
  int camera;
  Split split;
};

std::unordered_map<std::string, SidecarRow> read_sidecar(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open labels file " + file.string());
  std::unordered_map<std::string, SidecarRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (line != "path\tidentity\tmodality\torientation\tcamera\tsplit") {
    throw ParseError(file.string() + ": unexpected header '" + line + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_on(line, '\t');
    auto where = [&] { return file.string() + ":" + std::to_string(line_no); };
    if (cols.size() != 6) throw ParseError(where() + ": expected 6 columns");
    SidecarRow row{};
    if (!parse_number(cols[1], row.identity) || !parse_number(cols[3], row.orientation) ||
        !parse_number(cols[4], row.camera)) {
      throw ParseError(where() + ": malformed numeric column");
    }
    try {
      row.modality = parse_modality(cols[2]);
      row.split = parse_split(cols[5]);
    } catch (const ParseError& e) {
      throw ParseError(where() + ": " + e.what());
    }
    if (row.orientation < 0 || row.orientation >= kNumOrientations) {
      throw ValidationError(where() + ": orientation " + std::to_string(row.orientation) +
                            " outside [0,8)");
    }
    if (row.identity < 0) throw ValidationError(where() + ": negative identity");
    rows.emplace(std::string(cols[0]), row);
  }
  return rows;
}

}  // namespace

FileNameFields parse_file_name(const std::string& file_name) {
  const fs::path p(file_name);
  const std::string stem = p.stem().string();
  auto parts = split_on(stem, '_');
  FileNameFields f;
  if (parts.size() != 3 || !p.has_extension() || !parse_number(parts[0], f.camera) ||
      !parse_number(parts[1], f.identity) || !parse_number(parts[2], f.image_num) ||
      f.identity < 0) {
    throw ParseError("malformed file name '" + file_name +
                     "' (expected <camera>_<identity>_<imagenum>.<ext>)");
  }
  return f;
}

DatasetIndex::DatasetIndex(fs::path root, std::vector<SampleRecord> records)
    : root_(std::move(root)), records_(std::move(records)) {
  for (const auto& r : records_) {
    if (r.orientation < 0 || r.orientation >= kNumOrientations) {
      throw ValidationError(r.path + ": orientation outside [0,8)");
    }
    if (r.identity < 0) throw ValidationError(r.path + ": negative identity");
  }
  std::stable_sort(records_.begin(), records_.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return std::tie(a.identity, a.modality, a.image_num, a.camera, a.path) <
           std::tie(b.identity, b.modality, b.image_num, b.camera, b.path);
  });
  for (std::size_t i = 0; i < records_.size(); ++i) {
    auto& bucket = id_to_records_[records_[i].identity];
    (records_[i].modality == Modality::rgb ? bucket.rgb : bucket.ir).push_back(i);
  }
}

std::vector<std::int64_t> DatasetIndex::identities() const {
  std::vector<std::int64_t> ids;
  ids.reserve(id_to_records_.size());
  for (const auto& [id, _] : id_to_records_) ids.push_back(id);
  return ids;
}

DatasetIndex DatasetIndex::train_subset() const {
  std::vector<SampleRecord> out;
  std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
               [](const SampleRecord& r) { return !r.is_test(); });
  return DatasetIndex(root_, std::move(out));
}

DatasetIndex DatasetIndex::test_subset() const {
  std::vector<SampleRecord> out;
  std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
               [](const SampleRecord& r) { return r.is_test(); });
  return DatasetIndex(root_, std::move(out));
}

void DatasetIndex::require_both_modalities(std::string_view what) const {
  std::vector<std::int64_t> missing;
  for (const auto& [id, bucket] : id_to_records_) {
    if (bucket.rgb.empty() || bucket.ir.empty()) missing.push_back(id);
  }
  if (missing.empty()) return;
  std::ostringstream msg;
  msg << what << ": identities missing a modality:";
  for (auto id : missing) msg << ' ' << id;
  throw ValidationError(msg.str());
}

DatasetIndex load_ucm_veid_index(const fs::path& root, const fs::path& labels_file) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root is not a directory: " + root.string());

  std::unordered_map<std::string, SidecarRow> sidecar;
  fs::path sidecar_path = labels_file;
  if (sidecar_path.empty() && fs::exists(root / "labels.tsv")) sidecar_path = root / "labels.tsv";
  if (!sidecar_path.empty()) sidecar = read_sidecar(sidecar_path);

  std::vector<SampleRecord> records;
  for (Modality m : {Modality::rgb, Modality::ir}) {
    const fs::path dir = root / std::string(to_string(m));
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const std::string name = file.filename().string();
      FileNameFields f;
      try {
        f = parse_file_name(name);
      } catch (const ParseError& e) {
        throw ParseError((dir / name).string() + ": " + e.what());
      }
      SampleRecord r;
      r.path = std::string(to_string(m)) + "/" + name;
      r.identity = f.identity;
      r.modality = m;
      r.camera = f.camera;
      r.image_num = f.image_num;
      if (auto it = sidecar.find(r.path); it != sidecar.end()) {
        const auto& row = it->second;
        if (row.identity != r.identity || row.modality != m) {
          throw ValidationError(r.path + ": labels.tsv disagrees with the file name");
        }
        r.orientation = row.orientation;
        r.split = row.split;
      }
      records.push_back(std::move(r));
    }
  }
  DatasetIndex index(root, std::move(records));
  index.train_subset().require_both_modalities("train split");
  return index;
}

void write_labels_tsv(const fs::path& file, const std::vector<SampleRecord>& records) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << "path\tidentity\tmodality\torientation\tcamera\tsplit\n";
  for (const auto& r : records) {
    out << r.path << '\t' << r.identity << '\t' << to_string(r.modality) << '\t' << r.orientation
        << '\t' << r.camera << '\t' << to_string(r.split) << '\n';
  }
  if (!out) throw IoError("write failed for " + file.string());
}

QueryGallery split_query_gallery(const DatasetIndex& index, Direction direction, Shot shot, Rng& rng) {
  const Modality qm = query_modality(direction);
  const Modality gm = gallery_modality(direction);
  QueryGallery out;
  for (const auto& [id, bucket] : index.id_to_records()) {
    const auto& gallery = bucket.of(gm);
    if (gallery.empty()) {
      throw ValidationError("identity " + std::to_string(id) + " has no " +
                            std::string(to_string(gm)) + " records for the gallery");
    }
    const auto& query = bucket.of(qm);
    out.query.insert(out.query.end(), query.begin(), query.end());
    if (shot == Shot::multi) {
      out.gallery.insert(out.gallery.end(), gallery.begin(), gallery.end());
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, gallery.size() - 1);
      out.gallery.push_back(gallery[pick(rng)]);
    }
  }
  return out;
}

}  // namespace hwdnet
