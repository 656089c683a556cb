#include "emofuse/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "emofuse/error.hpp"

namespace emofuse {

namespace {

/// Reads the keys of one mapping and complains about any it did not consume.
class Section {
 public:
  Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw Error(ErrorKind::config, "'" + name_ + "' must be a mapping");
    }
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0 || !node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.contains(key)) throw Error(ErrorKind::config, "unknown config key '" + path(key) + "'");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return;
    const YAML::Node v = node_[key];
    if (!v || v.IsNull()) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw Error(ErrorKind::config, "config key '" + path(key) + "' has an invalid value");
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_ && node_.IsMap() ? node_[key] : YAML::Node();
  }

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  YAML::Node node_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void resolve(std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return;
  const std::filesystem::path path(p);
  if (path.is_relative()) p = (base / path).lexically_normal().string();
}

}  // namespace

std::vector<long long> parse_seed_list(const std::string& csv) {
  std::vector<long long> seeds;
  std::stringstream in(csv);
  for (std::string item; std::getline(in, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw Error(ErrorKind::usage, "empty entry in seed list '" + csv + "'");
    const std::string tok = item.substr(b, e - b + 1);
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw Error(ErrorKind::usage, "invalid seed '" + tok + "'");
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw Error(ErrorKind::usage, "seed list is empty");
  return seeds;
}

void AppConfig::validate() const {
  label_set();
  if (preprocess.max_len < 1) throw Error(ErrorKind::config, "preprocess.max_len must be positive");
  encoder.validate();
  cnn.validate();
  if (static_cast<std::size_t>(cnn.seq_len) != preprocess.max_len) {
    throw Error(ErrorKind::config, "cnn.seq_len (" + std::to_string(cnn.seq_len) + ") must equal preprocess.max_len (" +
                                       std::to_string(preprocess.max_len) + ")");
  }
  train.validate();
  if (device != "cpu") {
    throw Error(ErrorKind::config, "device '" + device + "' is not supported by this build (only 'cpu')");
  }
}

ModelSpec AppConfig::model_spec() const {
  ModelSpec spec;
  spec.variant = train.variant;
  spec.encoder = encoder;
  spec.cnn = cnn;
  spec.freeze_embeddings = freeze_embeddings;
  spec.encoder_uses_filtered_text = encoder_uses_filtered_text;
  spec.num_labels = static_cast<int>(labels.size());
  return spec;
}

AppConfig AppConfig::parse(const std::string& yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::config, std::string("malformed config: ") + e.what());
  }
  AppConfig c;
  {
    Section top(root, "");
    {
      Section s(top.child("paths"), "paths");
      s.read("train", c.paths.train);
      s.read("validation", c.paths.validation);
      s.read("test", c.paths.test);
      s.read("nrc_lexicon", c.paths.nrc_lexicon);
      s.read("embeddings", c.paths.embeddings);
      s.read("stopwords", c.paths.stopwords);
      s.read("checkpoint_dir", c.paths.checkpoint_dir);
      s.read("output_dir", c.paths.output_dir);
    }
    {
      Section s(top.child("data"), "data");
      s.read("labels", c.labels);
      Section cols(s.child("columns"), "data.columns");
      cols.read("essay", c.columns.essay);
      cols.read("label", c.columns.label);
      cols.read("id", c.columns.id);
    }
    {
      Section s(top.child("preprocess"), "preprocess");
      s.read("remove_stopwords", c.preprocess.remove_stopwords);
      s.read("max_len", c.preprocess.max_len);
    }
    {
      Section s(top.child("encoder"), "encoder");
      s.read("checkpoint", c.encoder.checkpoint_name);
      s.read("local_path", c.encoder.local_path);
      s.read("max_subword_len", c.encoder.max_subword_len);
      s.read("dropout", c.encoder.dropout_p);
      s.read("projection_dim", c.encoder.projection_dim);
      s.read("freeze", c.encoder.freeze_encoder);
      s.read("use_filtered_text", c.encoder_uses_filtered_text);
    }
    {
      Section s(top.child("cnn"), "cnn");
      s.read("embed_dim", c.cnn.embed_dim);
      s.read("seq_len", c.cnn.seq_len);
      s.read("conv1_channels", c.cnn.conv1_channels);
      s.read("conv1_kernel", c.cnn.conv1_kernel);
      s.read("pool1", c.cnn.pool1);
      s.read("conv2_channels", c.cnn.conv2_channels);
      s.read("conv2_kernel", c.cnn.conv2_kernel);
      s.read("pool2", c.cnn.pool2);
      s.read("freeze_embeddings", c.freeze_embeddings);
    }
    {
      Section s(top.child("train"), "train");
      std::string variant(to_string(c.train.variant));
      s.read("variant", variant);
      try {
        c.train.variant = parse_variant(variant);
      } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
      }
      s.read("lr", c.train.lr);
      s.read("beta1", c.train.beta1);
      s.read("beta2", c.train.beta2);
      s.read("weight_decay", c.train.weight_decay);
      s.read("batch_size", c.train.batch_size);
      s.read("patience", c.train.patience);
      s.read("max_epochs", c.train.max_epochs);
      s.read("seeds", c.train.seeds);
    }
    top.read("device", c.device);
  }
  for (auto* p : {&c.paths.train, &c.paths.validation, &c.paths.test, &c.paths.nrc_lexicon, &c.paths.embeddings,
                  &c.paths.stopwords, &c.paths.checkpoint_dir, &c.paths.output_dir, &c.encoder.local_path}) {
    resolve(*p, base_dir);
  }
  return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), std::filesystem::absolute(path).parent_path());
}

std::string AppConfig::to_yaml() const {
  YAML::Emitter out;
  const auto real = [&](const char* key, double v) { out << YAML::Key << key << YAML::Value << format_double(v); };
  out << YAML::BeginMap;

  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "train" << YAML::Value << paths.train;
  out << YAML::Key << "validation" << YAML::Value << paths.validation;
  out << YAML::Key << "test" << YAML::Value << paths.test;
  out << YAML::Key << "nrc_lexicon" << YAML::Value << paths.nrc_lexicon;
  out << YAML::Key << "embeddings" << YAML::Value << paths.embeddings;
  out << YAML::Key << "stopwords" << YAML::Value << paths.stopwords;
  out << YAML::Key << "checkpoint_dir" << YAML::Value << paths.checkpoint_dir;
  out << YAML::Key << "output_dir" << YAML::Value << paths.output_dir;
  out << YAML::EndMap;

  out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "labels" << YAML::Value << YAML::Flow << labels;
  out << YAML::Key << "columns" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "essay" << YAML::Value << columns.essay;
  out << YAML::Key << "label" << YAML::Value << columns.label;
  out << YAML::Key << "id" << YAML::Value << columns.id;
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "preprocess" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "remove_stopwords" << YAML::Value << preprocess.remove_stopwords;
  out << YAML::Key << "max_len" << YAML::Value << preprocess.max_len;
  out << YAML::EndMap;

  out << YAML::Key << "encoder" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "checkpoint" << YAML::Value << encoder.checkpoint_name;
  out << YAML::Key << "local_path" << YAML::Value << encoder.local_path;
  out << YAML::Key << "max_subword_len" << YAML::Value << encoder.max_subword_len;
  real("dropout", encoder.dropout_p);
  out << YAML::Key << "projection_dim" << YAML::Value << encoder.projection_dim;
  out << YAML::Key << "freeze" << YAML::Value << encoder.freeze_encoder;
  out << YAML::Key << "use_filtered_text" << YAML::Value << encoder_uses_filtered_text;
  out << YAML::EndMap;

  out << YAML::Key << "cnn" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "embed_dim" << YAML::Value << cnn.embed_dim;
  out << YAML::Key << "seq_len" << YAML::Value << cnn.seq_len;
  out << YAML::Key << "conv1_channels" << YAML::Value << cnn.conv1_channels;
  out << YAML::Key << "conv1_kernel" << YAML::Value << cnn.conv1_kernel;
  out << YAML::Key << "pool1" << YAML::Value << cnn.pool1;
  out << YAML::Key << "conv2_channels" << YAML::Value << cnn.conv2_channels;
  out << YAML::Key << "conv2_kernel" << YAML::Value << cnn.conv2_kernel;
  out << YAML::Key << "pool2" << YAML::Value << cnn.pool2;
  out << YAML::Key << "freeze_embeddings" << YAML::Value << freeze_embeddings;
  out << YAML::EndMap;

  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "variant" << YAML::Value << std::string(to_string(train.variant));
  real("lr", train.lr);
  real("beta1", train.beta1);
  real("beta2", train.beta2);
  real("weight_decay", train.weight_decay);
  out << YAML::Key << "batch_size" << YAML::Value << train.batch_size;
  out << YAML::Key << "patience" << YAML::Value << train.patience;
  out << YAML::Key << "max_epochs" << YAML::Value << train.max_epochs;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << train.seeds;
  out << YAML::EndMap;

  out << YAML::Key << "device" << YAML::Value << device;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void AppConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write config file " + path.string());
  out << to_yaml();
}

}  // namespace emofuse
