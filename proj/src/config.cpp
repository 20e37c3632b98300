#include "fedlsm/config.hpp"

#include "fedlsm/errors.hpp"

#include <fstream>
#include <set>

namespace fedlsm {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError("field '" + (path_.empty() ? std::string("<root>") : path_) + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T> T required(const std::string& key) {
    if (!j_.contains(key))
      throw ConfigError("missing required field '" + join(path_, key) + "'");
    return get<T>(key);
  }

  template <class T> T optional(const std::string& key, T fallback) {
    if (!j_.contains(key))
      return fallback;
    return get<T>(key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, join(path_, key));
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key))
        throw ConfigError("unknown field '" + join(path_, key) + "'");
  }

private:
  template <class T> T get(const std::string& key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field '" + join(path_, key) + "' has the wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

UnknownNorm parse_norm(const std::string& s) {
  if (s == "kept")
    return UnknownNorm::kept;
  if (s == "unlabeled")
    return UnknownNorm::unlabeled;
  throw ConfigError("field 'client.unknown_norm' must be 'kept' or 'unlabeled'");
}

MultiEntropyReduce parse_reduce(const std::string& s) {
  if (s == "mean")
    return MultiEntropyReduce::mean;
  if (s == "max")
    return MultiEntropyReduce::max;
  throw ConfigError("field 'client.entropy_reduce' must be 'mean' or 'max'");
}

template <class F> auto wrap_enum(const std::string& field, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    throw ConfigError("field '" + field + "': " + e.what());
  }
}

} // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded())
    value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty())
      throw ConfigError("override '" + assignment + "' has an empty path segment");
    if (!node->is_object())
      throw ConfigError("override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null())
      *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig parse_config(const json& doc) {
  Section root(doc, "");
  const int version = root.required<int>("schema_version");
  if (version != kConfigSchemaVersion)
    throw ConfigError("field 'schema_version': unsupported version " + std::to_string(version));

  ExperimentConfig cfg;
  SimulationConfig& sim = cfg.sim;
  sim.mode = wrap_enum("mode", [&] { return parse_mode(root.required<std::string>("mode")); });
  sim.rounds = root.required<int>("rounds");
  cfg.seeds = root.required<std::vector<std::uint64_t>>("seeds");
  if (cfg.seeds.empty())
    throw ConfigError("field 'seeds' must not be empty");
  if (sim.rounds < 1)
    throw ConfigError("field 'rounds' must be at least 1");
  sim.parallel_clients = root.optional<bool>("parallel_clients", false);

  {
    Section f = root.child("federation");
    if (!doc.contains("federation"))
      throw ConfigError("missing required field 'federation'");
    FederationConfig& fc = sim.federation;
    fc.num_clients = f.required<int>("num_clients");
    fc.num_classes = f.required<int>("num_classes");
    fc.identified_per_client = f.required<int>("identified_per_client");
    fc.feature_dim = f.required<int>("feature_dim");
    fc.task = wrap_enum("federation.task", [&] { return parse_task(f.required<std::string>("task")); });
    fc.samples_per_client = f.required<std::size_t>("samples_per_client");
    fc.validation_samples = f.optional<std::size_t>("validation_samples", fc.validation_samples);
    fc.test_samples = f.optional<std::size_t>("test_samples", fc.test_samples);
    fc.cluster_std = f.optional<double>("cluster_std", fc.cluster_std);
    fc.class_separation = f.optional<double>("class_separation", fc.class_separation);
    fc.class_priors = f.optional<std::vector<double>>("class_priors", fc.class_priors);
    fc.positive_rate_min = f.optional<double>("positive_rate_min", fc.positive_rate_min);
    fc.positive_rate_max = f.optional<double>("positive_rate_max", fc.positive_rate_max);
    fc.label_noise = f.optional<double>("label_noise", fc.label_noise);
    fc.max_coverage_attempts = f.optional<int>("max_coverage_attempts", fc.max_coverage_attempts);
    f.finish();
  }
  {
    Section m = root.child("model");
    sim.hidden = m.optional<std::vector<std::size_t>>("hidden", sim.hidden);
    m.finish();
  }
  {
    Section c = root.child("client");
    ClientConfig& cc = sim.client;
    cc.task = sim.federation.task;
    cc.tau = c.optional<double>("tau", cc.tau);
    cc.tau_l = c.optional<double>("tau_l", cc.tau_l);
    cc.tau_p = c.optional<double>("tau_p", cc.tau_p);
    cc.tau_n = c.optional<double>("tau_n", cc.tau_n);
    cc.tau_lp = c.optional<double>("tau_lp", cc.tau_lp);
    cc.tau_ln = c.optional<double>("tau_ln", cc.tau_ln);
    cc.lambda_ude = c.optional<double>("lambda", cc.lambda_ude);
    cc.ema_decay = c.optional<double>("ema_decay", cc.ema_decay);
    cc.mixup_alpha = c.optional<double>("mixup_alpha", cc.mixup_alpha);
    cc.lr = c.optional<double>("lr", cc.lr);
    cc.lr_decay = c.optional<double>("lr_decay", cc.lr_decay);
    cc.local_iters = c.optional<int>("local_iters", cc.local_iters);
    cc.batch_size = c.optional<int>("batch_size", cc.batch_size);
    cc.ude_batch = c.optional<int>("ude_batch", cc.ude_batch);
    cc.ude_retries = c.optional<int>("ude_retries", cc.ude_retries);
    cc.frac_l = c.optional<double>("frac_l", cc.frac_l);
    cc.frac_h = c.optional<double>("frac_h", cc.frac_h);
    cc.class_weights = c.optional<std::vector<double>>("class_weights", cc.class_weights);
    cc.weighted_bce = c.optional<bool>("weighted_bce", cc.weighted_bce);
    if (c.has("unknown_norm"))
      cc.unknown_norm = parse_norm(c.required<std::string>("unknown_norm"));
    if (c.has("entropy_reduce"))
      cc.entropy_reduce = parse_reduce(c.required<std::string>("entropy_reduce"));
    cc.adam.beta1 = c.optional<double>("adam_beta1", cc.adam.beta1);
    cc.adam.beta2 = c.optional<double>("adam_beta2", cc.adam.beta2);
    cc.adam.eps = c.optional<double>("adam_eps", cc.adam.eps);
    {
      Section a = c.child("augment");
      cc.augment.sigma_weak = a.optional<double>("sigma_weak", cc.augment.sigma_weak);
      cc.augment.sigma_strong = a.optional<double>("sigma_strong", cc.augment.sigma_strong);
      cc.augment.scale_jitter = a.optional<double>("scale_jitter", cc.augment.scale_jitter);
      cc.augment.drop_prob = a.optional<double>("drop_prob", cc.augment.drop_prob);
      a.finish();
    }
    c.finish();
  }
  {
    Section s = root.child("server");
    sim.awpa = s.optional<bool>("awpa", sim.awpa);
    s.finish();
  }
  {
    Section o = root.child("output");
    cfg.output_dir = o.optional<std::string>("dir", cfg.output_dir.string());
    cfg.report_file = o.optional<std::string>("report", cfg.report_file);
    cfg.summary_file = o.optional<std::string>("summary", cfg.summary_file);
    cfg.checkpoints = o.optional<bool>("checkpoints", cfg.checkpoints);
    o.finish();
  }
  root.finish();

  try {
    sim.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f)
    throw ConfigError("cannot read config file " + path.string());
  json doc = json::parse(f, nullptr, false, true);
  if (doc.is_discarded())
    throw ConfigError("config file " + path.string() + " is not valid JSON");
  for (const auto& o : overrides)
    apply_override(doc, o);
  return parse_config(doc);
}

json federation_json(const FederationConfig& f) {
  return json{{"num_clients", f.num_clients},
              {"num_classes", f.num_classes},
              {"identified_per_client", f.identified_per_client},
              {"feature_dim", f.feature_dim},
              {"task", to_string(f.task)},
              {"samples_per_client", f.samples_per_client},
              {"validation_samples", f.validation_samples},
              {"test_samples", f.test_samples},
              {"cluster_std", f.cluster_std},
              {"class_separation", f.class_separation},
              {"class_priors", f.class_priors},
              {"positive_rate_min", f.positive_rate_min},
              {"positive_rate_max", f.positive_rate_max},
              {"label_noise", f.label_noise},
              {"max_coverage_attempts", f.max_coverage_attempts}};
}

json to_json(const ExperimentConfig& cfg) {
  const auto& sim = cfg.sim;
  const auto& c = sim.client;
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"mode", to_string(sim.mode)},
      {"rounds", sim.rounds},
      {"seeds", cfg.seeds},
      {"parallel_clients", sim.parallel_clients},
      {"federation", federation_json(sim.federation)},
      {"model", {{"hidden", sim.hidden}}},
      {"client",
       {{"tau", c.tau},
        {"tau_l", c.tau_l},
        {"tau_p", c.tau_p},
        {"tau_n", c.tau_n},
        {"tau_lp", c.tau_lp},
        {"tau_ln", c.tau_ln},
        {"lambda", c.lambda_ude},
        {"ema_decay", c.ema_decay},
        {"mixup_alpha", c.mixup_alpha},
        {"lr", c.lr},
        {"lr_decay", c.lr_decay},
        {"local_iters", c.local_iters},
        {"batch_size", c.batch_size},
        {"ude_batch", c.ude_batch},
        {"ude_retries", c.ude_retries},
        {"frac_l", c.frac_l},
        {"frac_h", c.frac_h},
        {"class_weights", c.class_weights},
        {"weighted_bce", c.weighted_bce},
        {"unknown_norm", c.unknown_norm == UnknownNorm::kept ? "kept" : "unlabeled"},
        {"entropy_reduce", c.entropy_reduce == MultiEntropyReduce::mean ? "mean" : "max"},
        {"adam_beta1", c.adam.beta1},
        {"adam_beta2", c.adam.beta2},
        {"adam_eps", c.adam.eps},
        {"augment",
         {{"sigma_weak", c.augment.sigma_weak},
          {"sigma_strong", c.augment.sigma_strong},
          {"scale_jitter", c.augment.scale_jitter},
          {"drop_prob", c.augment.drop_prob}}}}},
      {"server", {{"awpa", sim.awpa}}},
      {"output",
       {{"dir", cfg.output_dir.string()},
        {"report", cfg.report_file},
        {"summary", cfg.summary_file},
        {"checkpoints", cfg.checkpoints}}}};
}

json default_config_json() {
  return json{{"schema_version", kConfigSchemaVersion},
              {"mode", "fedlsm"},
              {"rounds", 30},
              {"seeds", {1, 2, 3}},
              {"federation",
               {{"num_clients", 5},
                {"num_classes", 7},
                {"identified_per_client", 3},
                {"feature_dim", 16},
                {"task", "single_label"},
                {"samples_per_client", 500}}}};
}

} // namespace fedlsm
