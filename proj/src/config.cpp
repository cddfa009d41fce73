#include "mvbow/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mvbow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_real(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_flag(const std::string& v, const std::string& key) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "' expects on/off, got '" + v + "'");
}

}  // namespace

std::vector<TransformStep> parse_transform_chain(const std::string& text) {
  std::vector<TransformStep> chain;
  if (text == "none" || text.empty()) return chain;
  std::istringstream ss(text);
  std::string step;
  while (std::getline(ss, step, '+')) {
    step = trim(step);
    if (step.rfind("power:", 0) == 0) {
      TransformStep t;
      t.kind = TransformStep::Kind::PowerLaw;
      t.beta = to_real(step.substr(6), "transform");
      chain.push_back(t);
    } else if (step.rfind("project:", 0) == 0) {
      TransformStep t;
      t.kind = TransformStep::Kind::Project;
      t.model_ref = trim(step.substr(8));
      if (t.model_ref.empty()) throw ConfigError("project: step needs a model path or @name");
      chain.push_back(t);
    } else {
      throw ConfigError("unknown transform step '" + step + "' (expect power:B or project:REF)");
    }
  }
  return chain;
}

std::string transform_chain_label(const std::vector<TransformStep>& chain) {
  if (chain.empty()) return "none";
  std::ostringstream out;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i > 0) out << '+';
    if (chain[i].kind == TransformStep::Kind::PowerLaw)
      out << "power:" << chain[i].beta;
    else
      out << "project:" << chain[i].model_ref;
  }
  return out.str();
}

std::string VocabEntryConfig::chain_label() const { return transform_chain_label(transform); }

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);

  PipelineConfig cfg;
  cfg.config_dir = std::filesystem::path(path).parent_path().string();

  enum class Section { Top, Vocab, DescPca, Synth };
  Section section = Section::Top;
  std::string line;
  std::size_t lineno = 0;

  auto synth_ref = [&]() -> SynthSpec& {
    if (!cfg.synth) cfg.synth = SynthSpec{};
    return *cfg.synth;
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line == "[vocab]") {
        section = Section::Vocab;
        cfg.vocabs.emplace_back();
      } else if (line == "[desc_pca]") {
        section = Section::DescPca;
        cfg.desc_pca.emplace_back();
      } else if (line == "[synth]") {
        section = Section::Synth;
        synth_ref();
      } else {
        throw ConfigError("unknown section " + line + " at line " + std::to_string(lineno));
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("empty key or value at line " + std::to_string(lineno));

    switch (section) {
      case Section::Top:
        if (key == "manifest") cfg.manifest = value;
        else if (key == "training_manifest") cfg.training_manifest = value;
        else if (key == "queries_manifest") cfg.queries_manifest = value;
        else if (key == "ground_truth") cfg.ground_truth = value;
        else if (key == "output") cfg.output = value;
        else if (key == "ssr_beta") cfg.ssr_beta = to_real(value, key);
        else if (key == "idf") cfg.idf = to_flag(value, key);
        else if (key == "d_out") cfg.d_out = static_cast<int>(to_int(value, key));
        else if (key == "training_tag") cfg.training_tag = value;
        else if (key == "kmeans_max_iters") cfg.kmeans_max_iters = static_cast<int>(to_int(value, key));
        else if (key == "kmeans_tol") cfg.kmeans_tol = to_real(value, key);
        else if (key == "kmeans_sample") cfg.kmeans_sample = static_cast<std::size_t>(to_int(value, key));
        else if (key == "search_top") cfg.search_top = static_cast<int>(to_int(value, key));
        else throw ConfigError("unknown key '" + key + "' at line " + std::to_string(lineno));
        break;

      case Section::Vocab: {
        auto& entry = cfg.vocabs.back();
        if (key == "channel") entry.channel = value;
        else if (key == "transform") entry.transform = parse_transform_chain(value);
        else if (key == "k") entry.k = static_cast<int>(to_int(value, key));
        else if (key == "seed") entry.seed = static_cast<std::uint64_t>(to_int(value, key));
        else if (key == "weight") {
          if (value != "auto") entry.weight = to_real(value, key);
        } else throw ConfigError("unknown [vocab] key '" + key + "' at line " + std::to_string(lineno));
        break;
      }

      case Section::DescPca: {
        auto& entry = cfg.desc_pca.back();
        if (key == "name") entry.name = value;
        else if (key == "channel") entry.channel = value;
        else if (key == "d_out") entry.d_out = static_cast<int>(to_int(value, key));
        else if (key == "sample") entry.sample = static_cast<std::size_t>(to_int(value, key));
        else if (key == "seed") entry.seed = static_cast<std::uint64_t>(to_int(value, key));
        else throw ConfigError("unknown [desc_pca] key '" + key + "' at line " + std::to_string(lineno));
        break;
      }

      case Section::Synth: {
        auto& s = synth_ref();
        if (key == "seed") s.seed = static_cast<std::uint64_t>(to_int(value, key));
        else if (key == "images") s.n_images = static_cast<int>(to_int(value, key));
        else if (key == "queries") s.n_queries = static_cast<int>(to_int(value, key));
        else if (key == "descriptors") s.descriptors_per_image = static_cast<int>(to_int(value, key));
        else if (key == "dim") s.dim = static_cast<int>(to_int(value, key));
        else if (key == "clusters") s.n_clusters = static_cast<int>(to_int(value, key));
        else if (key == "spread") s.spread = to_real(value, key);
        else if (key == "positives") s.positives_per_query = static_cast<int>(to_int(value, key));
        else throw ConfigError("unknown [synth] key '" + key + "' at line " + std::to_string(lineno));
        break;
      }
    }
  }

  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  if (manifest.empty() && !synth)
    throw ConfigError("config needs a manifest (or a [synth] section that generates one)");
  if (vocabs.empty()) throw ConfigError("config needs at least one [vocab] entry");
  if (!(ssr_beta >= 0.0 && ssr_beta <= 1.0)) throw ConfigError("ssr_beta must lie in [0, 1]");
  if (d_out < 1) throw ConfigError("d_out must be >= 1");
  if (kmeans_max_iters < 1) throw ConfigError("kmeans_max_iters must be >= 1");
  if (!(kmeans_tol >= 0.0)) throw ConfigError("kmeans_tol must be >= 0");
  if (search_top < 0) throw ConfigError("search_top must be >= 0");

  long long total_k = 0;
  for (std::size_t v = 0; v < vocabs.size(); ++v) {
    const auto& entry = vocabs[v];
    if (entry.channel.empty())
      throw ConfigError("[vocab] entry " + std::to_string(v) + " misses a channel");
    if (entry.k < 1) throw ConfigError("[vocab] entry " + std::to_string(v) + " needs k >= 1");
    if (entry.weight && !(*entry.weight > 0.0))
      throw ConfigError("[vocab] entry " + std::to_string(v) + " weight must be positive");
    for (const auto& step : entry.transform)
      if (step.kind == TransformStep::Kind::PowerLaw && (!(step.beta > 0.0) || step.beta > 1.0))
        throw ConfigError("[vocab] entry " + std::to_string(v) + " power exponent must lie in (0,1]");
    total_k += entry.k;
  }
  if (d_out > total_k)
    throw ConfigError("d_out " + std::to_string(d_out) + " exceeds total vocabulary size " +
                      std::to_string(total_k));

  std::set<std::string> pca_names;
  for (const auto& p : desc_pca) {
    if (p.name.empty()) throw ConfigError("[desc_pca] entry misses a name");
    if (p.channel.empty()) throw ConfigError("[desc_pca] " + p.name + " misses a channel");
    if (p.d_out < 1) throw ConfigError("[desc_pca] " + p.name + " needs d_out >= 1");
    if (!pca_names.insert(p.name).second)
      throw ConfigError("duplicate [desc_pca] name " + p.name);
  }
  for (const auto& entry : vocabs)
    for (const auto& step : entry.transform)
      if (step.kind == TransformStep::Kind::Project && step.model_ref.rfind('@', 0) == 0 &&
          pca_names.count(step.model_ref.substr(1)) == 0)
        throw ConfigError("transform references unknown [desc_pca] entry " + step.model_ref);

  if (synth) {
    try {
      synth->validate();
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("[synth]: ") + e.what());
    }
  }
}

std::string PipelineConfig::resolve(const std::string& path) const {
  if (path.empty() || std::filesystem::path(path).is_absolute() || config_dir.empty()) return path;
  return (std::filesystem::path(config_dir) / path).string();
}

}  // namespace mvbow
