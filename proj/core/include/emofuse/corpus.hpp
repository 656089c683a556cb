#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace emofuse {

using LabelIndex = int;

/// Ordered emotion label inventory with a name <-> index bijection.
class LabelSet {
 public:
  /// The six emotions shared between the task and the NRC intensity lexicon.
  static const std::vector<std::string>& required_emotions();

  /// {anger, disgust, fear, joy, neutral, sadness, surprise}.
  static LabelSet default_set();

  /// Throws Error(data) on duplicates or when a required emotion is missing.
  explicit LabelSet(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  LabelIndex index_of(std::string_view name) const;
  std::optional<LabelIndex> find(std::string_view name) const;
  const std::string& name_of(LabelIndex index) const;

  bool operator==(const LabelSet& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, LabelIndex> index_;
};

struct Essay {
  std::string id;
  std::string raw_text;
  std::optional<LabelIndex> gold_label;

  bool operator==(const Essay&) const = default;
};

struct DatasetSplit {
  std::string name;
  std::vector<Essay> essays;

  std::size_t size() const { return essays.size(); }
  bool labeled() const;
  bool operator==(const DatasetSplit&) const = default;
};

struct TsvColumns {
  std::string essay = "essay";
  std::string label = "emotion";
  std::string id = "message_id";
  bool operator==(const TsvColumns&) const = default;
};

/// Reads a tab-separated essay file with a header row.
///
/// The label column is required for "train" and "validation" and optional
/// otherwise; unlabeled rows get an absent gold label. When the id column is
/// missing, ids are the 1-based data row numbers. Unrelated columns (empathy,
/// distress, personality) are ignored.
///
/// Throws Error(io) for a missing file, Error(format) for a missing column or
/// short row, and Error(data) for unknown labels, duplicate ids, blank essays
/// or a file with no data rows ("empty dataset").
DatasetSplit load_dataset(const std::filesystem::path& path, const LabelSet& label_set,
                          const std::string& split_name, const TsvColumns& columns = {});

/// Label name -> count, with every label present (possibly 0).
/// Throws Error(data) if any essay is unlabeled.
std::map<std::string, std::size_t> class_distribution(const DatasetSplit& split,
                                                      const LabelSet& label_set);

/// JSON object with counts in label-set order.
std::string distribution_to_json(const std::map<std::string, std::size_t>& histogram,
                                 const LabelSet& label_set);

/// Standalone SVG bar chart of a class histogram.
std::string distribution_to_svg(const std::map<std::string, std::size_t>& histogram,
                                const LabelSet& label_set, const std::string& title);

}  // namespace emofuse
