#include "emofuse/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "emofuse/error.hpp"
#include "json.hpp"

namespace emofuse {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view strip(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\v\f");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\v\f");
  return s.substr(first, last - first + 1);
}

std::optional<std::size_t> column_of(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

const std::vector<std::string>& LabelSet::required_emotions() {
  static const std::vector<std::string> names{"anger", "joy", "sadness", "disgust", "fear", "surprise"};
  return names;
}

LabelSet LabelSet::default_set() {
  return LabelSet({"anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"});
}

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], static_cast<LabelIndex>(i)).second) {
      throw Error(ErrorKind::data, "duplicate label '" + labels_[i] + "' in label set");
    }
  }
  for (const auto& required : required_emotions()) {
    if (!index_.contains(required)) {
      throw Error(ErrorKind::data, "label set is missing required emotion '" + required + "'");
    }
  }
}

LabelIndex LabelSet::index_of(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw Error(ErrorKind::data, "unknown label '" + std::string(name) + "'");
}

std::optional<LabelIndex> LabelSet::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& LabelSet::name_of(LabelIndex index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= labels_.size()) {
    throw Error(ErrorKind::data, "label index " + std::to_string(index) + " out of range");
  }
  return labels_[static_cast<std::size_t>(index)];
}

bool DatasetSplit::labeled() const {
  return std::all_of(essays.begin(), essays.end(), [](const Essay& e) { return e.gold_label.has_value(); });
}

DatasetSplit load_dataset(const std::filesystem::path& path, const LabelSet& label_set,
                          const std::string& split_name, const TsvColumns& columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open dataset file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::data, "empty dataset: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  const auto header = split_tabs(line);

  const auto essay_col = column_of(header, columns.essay);
  if (!essay_col) {
    throw Error(ErrorKind::format, "missing column '" + columns.essay + "' in " + path.string());
  }
  const bool needs_label = split_name == "train" || split_name == "validation";
  const auto label_col = column_of(header, columns.label);
  if (needs_label && !label_col) {
    throw Error(ErrorKind::format, "missing column '" + columns.label + "' in " + path.string());
  }
  const auto id_col = column_of(header, columns.id);

  DatasetSplit split{split_name, {}};
  std::unordered_set<std::string> seen_ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    ++row;
    const auto fields = split_tabs(line);
    const auto need = std::max({*essay_col, label_col.value_or(0), id_col.value_or(0)});
    if (fields.size() <= need) {
      throw Error(ErrorKind::format, path.string() + ": row " + std::to_string(row) + " has " +
                                         std::to_string(fields.size()) + " columns, expected at least " +
                                         std::to_string(need + 1));
    }
    Essay essay;
    essay.id = id_col ? std::string(strip(fields[*id_col])) : std::to_string(row);
    essay.raw_text = fields[*essay_col];
    if (strip(essay.raw_text).empty()) {
      throw Error(ErrorKind::data, path.string() + ": row " + std::to_string(row) + " has an empty essay");
    }
    if (label_col) {
      const auto label = strip(fields[*label_col]);
      if (!label.empty()) {
        const auto index = label_set.find(label);
        if (!index) {
          throw Error(ErrorKind::data, path.string() + ": row " + std::to_string(row) + ": unknown label '" +
                                           std::string(label) + "'");
        }
        essay.gold_label = *index;
      } else if (needs_label) {
        throw Error(ErrorKind::data, path.string() + ": row " + std::to_string(row) + " has no label");
      }
    }
    if (!seen_ids.insert(essay.id).second) {
      throw Error(ErrorKind::data, path.string() + ": duplicate essay id '" + essay.id + "'");
    }
    split.essays.push_back(std::move(essay));
  }
  if (split.essays.empty()) throw Error(ErrorKind::data, "empty dataset: " + path.string());
  return split;
}

std::map<std::string, std::size_t> class_distribution(const DatasetSplit& split, const LabelSet& label_set) {
  std::map<std::string, std::size_t> histogram;
  for (const auto& name : label_set.labels()) histogram[name] = 0;
  for (const auto& essay : split.essays) {
    if (!essay.gold_label) {
      throw Error(ErrorKind::data, "class_distribution: essay '" + essay.id + "' is unlabeled");
    }
    ++histogram[label_set.name_of(*essay.gold_label)];
  }
  return histogram;
}

std::string distribution_to_json(const std::map<std::string, std::size_t>& histogram,
                                 const LabelSet& label_set) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& name : label_set.labels()) {
    const auto it = histogram.find(name);
    out[name] = it == histogram.end() ? 0 : it->second;
  }
  return out.dump(2);
}

std::string distribution_to_svg(const std::map<std::string, std::size_t>& histogram,
                                const LabelSet& label_set, const std::string& title) {
  constexpr int bar_width = 60;
  constexpr int gap = 20;
  constexpr int plot_height = 240;
  constexpr int margin = 40;
  std::size_t peak = 1;
  for (const auto& [_, count] : histogram) peak = std::max(peak, count);

  const int width = margin * 2 + static_cast<int>(label_set.size()) * (bar_width + gap);
  const int height = plot_height + margin * 3;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "  <text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  int x = margin;
  for (const auto& name : label_set.labels()) {
    const auto it = histogram.find(name);
    const std::size_t count = it == histogram.end() ? 0 : it->second;
    const int h = static_cast<int>(static_cast<double>(count) / static_cast<double>(peak) * plot_height);
    const int y = margin + plot_height - h;
    svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_width << "\" height=\"" << h
        << "\" fill=\"#4c72b0\"/>\n";
    svg << "  <text x=\"" << x + bar_width / 2 << "\" y=\"" << y - 4 << "\" text-anchor=\"middle\">" << count
        << "</text>\n";
    svg << "  <text x=\"" << x + bar_width / 2 << "\" y=\"" << margin + plot_height + 16
        << "\" text-anchor=\"middle\">" << name << "</text>\n";
    x += bar_width + gap;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace emofuse
