#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hwdnet {

enum class Modality : std::uint8_t { rgb = 0, ir = 1 };
enum class Split : std::uint8_t { train = 0, query = 1, gallery = 2 };
enum class Direction : std::uint8_t { ir2rgb = 0, rgb2ir = 1 };
enum class Shot : std::uint8_t { single = 0, multi = 1 };

inline constexpr int kNumOrientations = 8;

std::string_view to_string(Modality m);
std::string_view to_string(Split s);
std::string_view to_string(Direction d);
std::string_view to_string(Shot s);
Modality parse_modality(std::string_view text);
Split parse_split(std::string_view text);
Direction parse_direction(std::string_view text);
Shot parse_shot(std::string_view text);

inline Modality query_modality(Direction d) {
  return d == Direction::ir2rgb ? Modality::ir : Modality::rgb;
}
inline Modality gallery_modality(Direction d) {
  return d == Direction::ir2rgb ? Modality::rgb : Modality::ir;
}

// Orientation classes run clockwise from "front" (0) in 45 degree steps.
// Mirroring the image left-right maps heading k to (8 - k) mod 8.
inline int mirrored_orientation(int k) { return (kNumOrientations - k) % kNumOrientations; }

using Rng = std::mt19937_64;

struct SampleRecord {
  std::string path;  // relative to the dataset root
  std::int64_t identity = 0;
  Modality modality = Modality::rgb;
  int orientation = 0;
  int camera = 0;
  int image_num = 0;
  Split split = Split::train;

  bool is_test() const { return split != Split::train; }
};

// Parsed `<camera>_<identity>_<imagenum>` stem of a dataset file name.
struct FileNameFields {
  int camera = 0;
  std::int64_t identity = 0;
  int image_num = 0;
};
FileNameFields parse_file_name(const std::string& file_name);

struct IdentityRecords {
  std::vector<std::size_t> rgb;
  std::vector<std::size_t> ir;

  const std::vector<std::size_t>& of(Modality m) const { return m == Modality::rgb ? rgb : ir; }
};

// Immutable after construction. Records are sorted by (identity, modality,
// image number) and every record belongs to exactly one identity bucket.
class DatasetIndex {
 public:
  DatasetIndex() = default;
  DatasetIndex(std::filesystem::path root, std::vector<SampleRecord> records);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<SampleRecord>& records() const { return records_; }
  const SampleRecord& record(std::size_t i) const { return records_.at(i); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::map<std::int64_t, IdentityRecords>& id_to_records() const { return id_to_records_; }
  std::size_t num_identities() const { return id_to_records_.size(); }
  std::vector<std::int64_t> identities() const;

  // Records of the training split, or of the test split (query + gallery).
  DatasetIndex train_subset() const;
  DatasetIndex test_subset() const;

  // Throws ValidationError listing identities that lack one of the modalities.
  void require_both_modalities(std::string_view what) const;

  std::filesystem::path absolute_path(const SampleRecord& r) const { return root_ / r.path; }

 private:
  std::filesystem::path root_;
  std::vector<SampleRecord> records_;
  std::map<std::int64_t, IdentityRecords> id_to_records_;
};

// Scans `root/rgb` and `root/ir`. `labels_file` is the optional labels.tsv
// sidecar carrying orientation and split; when it is empty, `root/labels.tsv`
// is used if it exists. Files without a sidecar row get orientation 0 and the
// train split.
DatasetIndex load_ucm_veid_index(const std::filesystem::path& root,
                                 const std::filesystem::path& labels_file = {});

void write_labels_tsv(const std::filesystem::path& file, const std::vector<SampleRecord>& records);

struct QueryGallery {
  std::vector<std::size_t> query;    // indices into the index' records
  std::vector<std::size_t> gallery;
};

// IR2RGB queries every IR record against RGB gallery records (RGB2IR swaps
// the roles). Single-shot keeps one gallery record per identity, drawn with
// `rng`; multi-shot keeps all of them.
QueryGallery split_query_gallery(const DatasetIndex& index, Direction direction, Shot shot, Rng& rng);

}  // namespace hwdnet
