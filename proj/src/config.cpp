#include "icas/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace icas::exp {

namespace {
std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::set<std::string> kKinds = {"train", "sample", "ablate-gate", "ablate-embed",
                                      "compare-strategies", "sweep-gamma"};

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
    }
}
}  // namespace

void ExperimentConfig::validate() const {
    if (!kKinds.count(kind))
        throw ConfigError("config: unknown experiment kind '" + kind + "'");
    try {
        backbone.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (corpus.subjects < 1 || corpus.subjects > 4)
        throw ConfigError("config: corpus subjects must be in [1,4]");
    if (corpus.train_images == 0 || corpus.eval_images == 0)
        throw ConfigError("config: corpus image counts must be >= 1");
    if (corpus.image_size % backbone.latent_h != 0 ||
        corpus.image_size % backbone.latent_w != 0)
        throw ConfigError("config: image_size must be a multiple of the latent grid");
    if (train.timesteps == 0 || train.batch_size == 0)
        throw ConfigError("config: train timesteps and batch_size must be >= 1");
}

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    std::size_t lineno = 0;
    std::set<std::string> seen_keys;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = line.substr(1, line.size() - 2);
            if (section != "experiment" && section != "backbone" &&
                section != "train" && section != "corpus")
                throw ConfigError("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section + "." + key;
        if (!seen_keys.insert(qualified).second)
            throw ConfigError("config: duplicate key " + qualified);

        if (qualified == "experiment.kind") cfg.kind = value;
        else if (qualified == "experiment.seed") cfg.seed = parse_uint(qualified, value);
        else if (qualified == "experiment.out") cfg.out_dir = value;
        else if (qualified == "backbone.latent_h") cfg.backbone.latent_h = parse_uint(qualified, value);
        else if (qualified == "backbone.latent_w") cfg.backbone.latent_w = parse_uint(qualified, value);
        else if (qualified == "backbone.width") cfg.backbone.width = parse_uint(qualified, value);
        else if (qualified == "backbone.blocks") cfg.backbone.blocks = parse_uint(qualified, value);
        else if (qualified == "backbone.style_tokens") cfg.backbone.style_tokens = parse_uint(qualified, value);
        else if (qualified == "backbone.alpha") cfg.backbone.gate.alpha = parse_double(qualified, value);
        else if (qualified == "backbone.gamma") cfg.backbone.structure.gamma = parse_double(qualified, value);
        else if (qualified == "backbone.gate") {
            if (value == "learned") cfg.backbone.gate.mode = sim::GateMode::Learned;
            else if (value.rfind("fixed:", 0) == 0) {
                cfg.backbone.gate.mode = sim::GateMode::FixedConstant;
                cfg.backbone.gate.fixed_value = parse_double(qualified, value.substr(6));
            } else throw ConfigError("config: gate must be 'learned' or 'fixed:<c>'");
        } else if (qualified == "backbone.spm_sites") {
            cfg.backbone.spm_sites.clear();
            std::istringstream vs(value);
            std::string tok;
            while (std::getline(vs, tok, ','))
                cfg.backbone.spm_sites.push_back(parse_uint(qualified, trim(tok)) != 0);
        }
        else if (qualified == "train.steps") cfg.train.steps = parse_uint(qualified, value);
        else if (qualified == "train.lr") cfg.train.learning_rate = parse_double(qualified, value);
        else if (qualified == "train.beta1") cfg.train.beta1 = parse_double(qualified, value);
        else if (qualified == "train.beta2") cfg.train.beta2 = parse_double(qualified, value);
        else if (qualified == "train.eps") cfg.train.eps = parse_double(qualified, value);
        else if (qualified == "train.weight_decay") cfg.train.weight_decay = parse_double(qualified, value);
        else if (qualified == "train.lambda_gate") cfg.train.lambda_gate = parse_double(qualified, value);
        else if (qualified == "train.batch_size") cfg.train.batch_size = parse_uint(qualified, value);
        else if (qualified == "train.timesteps") cfg.train.timesteps = parse_uint(qualified, value);
        else if (qualified == "train.preset") {
            try {
                cfg.preset = train::preset_from_name(value);
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
        }
        else if (qualified == "train.checkpoint") cfg.checkpoint = value;
        else if (qualified == "corpus.images") cfg.corpus.train_images = parse_uint(qualified, value);
        else if (qualified == "corpus.eval_images") cfg.corpus.eval_images = parse_uint(qualified, value);
        else if (qualified == "corpus.subjects") cfg.corpus.subjects = parse_uint(qualified, value);
        else if (qualified == "corpus.image_size") cfg.corpus.image_size = parse_uint(qualified, value);
        else if (qualified == "corpus.styles") cfg.corpus.styles = parse_uint(qualified, value);
        else if (qualified == "corpus.seed") cfg.corpus.seed = parse_uint(qualified, value);
        else if (qualified == "corpus.embed_mode") {
            if (value == "segmentation") cfg.corpus.embed_mode = cycle::ExtractMode::Segmentation;
            else if (value == "augmentation") cfg.corpus.embed_mode = cycle::ExtractMode::Augmentation;
            else throw ConfigError("config: embed_mode must be segmentation or augmentation");
        }
        else throw ConfigError("config: unknown key '" + qualified + "'");
    }
    // train.seed mirrors the experiment seed unless training is re-seeded later
    cfg.train.seed = cfg.seed;
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str());
}

}  // namespace icas::exp
