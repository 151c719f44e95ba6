#include "advpc/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "advpc/error.hpp"

namespace advpc::harness {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return key.front() != '.' && key.back() != '.' && key.find("..") == std::string_view::npos;
}

// Strips a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(std::string_view v, std::size_t line_no) {
  if (!v.empty() && v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("key '" + key + "': expected " + what + ", got '" + value + "'");
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text) {
  ConfigFile cfg;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw ConfigError(where + "bad section name '" + std::string(name) + "'");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + "bad key '" + std::string(key) + "'");
    const auto full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (cfg.values_.count(full)) throw ConfigError(where + "duplicate key '" + full + "'");
    cfg.values_[full] = unquote(trim(line.substr(eq + 1)), line_no);
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::string* ConfigFile::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  read_.insert(key);
  return &it->second;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) bad_value(key, *v, "a number");
  return out;
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) bad_value(key, *v, "a non-negative integer");
  return out;
}

std::size_t ConfigFile::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true") return true;
  if (*v == "false") return false;
  bad_value(key, *v, "true or false");
}

std::vector<std::string> ConfigFile::get_list(const std::string& key,
                                              const std::vector<std::string>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  std::string_view rest = *v;
  while (true) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (item.empty()) bad_value(key, *v, "a comma-separated list");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::vector<std::string> ConfigFile::subsections(const std::string& prefix) const {
  std::vector<std::string> out;
  const auto head = prefix + ".";
  for (const auto& [key, _] : values_) {
    if (key.rfind(head, 0) != 0) continue;
    const auto rest = key.substr(head.size());
    const auto dot = rest.find('.');
    if (dot == std::string::npos) continue;
    const auto name = rest.substr(0, dot);
    if (out.empty() || out.back() != name) out.push_back(name);
  }
  return out;
}

std::string ConfigFile::canonical(const std::set<std::string>& exclude) const {
  std::string out;
  for (const auto& [key, value] : values_)
    if (!exclude.count(key)) out += key + " = " + value + "\n";
  return out;
}

std::vector<std::string> ConfigFile::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, _] : values_)
    if (!read_.count(key)) out.push_back(key);
  return out;
}

namespace {

nn::TrainConfig read_train(const ConfigFile& f, const std::string& s, std::uint64_t seed) {
  nn::TrainConfig t;
  t.epochs = f.get_size(s + ".epochs", 10);
  t.batch_size = f.get_size(s + ".batch_size", t.batch_size);
  t.lr = f.get_double(s + ".lr", t.lr);
  t.momentum = f.get_double(s + ".momentum", t.momentum);
  t.weight_decay = f.get_double(s + ".weight_decay", t.weight_decay);
  t.seed = f.get_u64(s + ".seed", seed);
  return t;
}

attack::BaselineConfig read_baseline(const ConfigFile& f, const std::string& s,
                                     std::uint64_t seed) {
  attack::BaselineConfig b;
  b.eps = f.get_double(s + ".eps", b.eps);
  b.steps = f.get_size(s + ".steps", b.steps);
  b.step_size = f.get_double(s + ".step_size", b.step_size);
  b.seed = f.get_u64(s + ".seed", seed);
  return b;
}

}  // namespace

ExperimentConfig experiment_from(const ConfigFile& f) {
  ExperimentConfig c;
  c.config_text = f.canonical({"out", "workers"});
  c.seed = f.get_u64("seed", c.seed);
  c.workers = f.get_size("workers", c.workers);
  c.out_dir = f.get_string("out", c.out_dir.string());
  c.eval_count = f.get_size("experiment.eval_count", c.eval_count);
  c.include_proxy_target = f.get_bool("experiment.include_proxy_target", c.include_proxy_target);
  c.attacks = f.get_list("experiment.attacks", c.attacks);
  c.defenses = f.get_list("experiment.defenses", c.defenses);

  // Unset component seeds are fixed offsets from the master seed.
  const std::uint64_t s = c.seed;
  auto& d = c.dataset;
  d.classes = f.get_size("dataset.classes", d.classes);
  d.points = f.get_size("dataset.points", d.points);
  d.train_per_class = f.get_size("dataset.train_per_class", d.train_per_class);
  d.test_per_class = f.get_size("dataset.test_per_class", d.test_per_class);
  d.seed = f.get_u64("dataset.seed", s);
  d.scale_lo = f.get_double("dataset.scale_lo", d.scale_lo);
  d.scale_hi = f.get_double("dataset.scale_hi", d.scale_hi);
  d.jitter_sigma = f.get_double("dataset.jitter_sigma", d.jitter_sigma);
  d.jitter_clip = f.get_double("dataset.jitter_clip", d.jitter_clip);

  c.proxy.name = f.get_string("proxy.name", "lite");
  c.proxy.arch = f.get_string("proxy.arch", "pointnet-lite");
  c.proxy.train = read_train(f, "proxy", s + 1);

  const auto target_names = f.subsections("target");
  for (std::size_t i = 0; i < target_names.size(); ++i) {
    const auto sec = "target." + target_names[i];
    ClassifierSpec t;
    t.name = target_names[i];
    t.arch = f.get_string(sec + ".arch", "pointnet-lite-wide");
    t.train = read_train(f, sec, s + 2 + i);
    c.targets.push_back(std::move(t));
  }
  if (target_names.empty()) {
    ClassifierSpec t;
    t.name = "wide";
    t.arch = "pointnet-lite-wide";
    t.train = read_train(f, "target.wide", s + 2);
    c.targets.push_back(std::move(t));
  }

  auto& df = c.diffusion;
  df.steps = f.get_size("diffusion.steps", df.steps);
  df.beta_start = f.get_double("diffusion.beta_start", df.beta_start);
  df.beta_end = f.get_double("diffusion.beta_end", df.beta_end);
  df.latent_dim = f.get_size("diffusion.latent_dim", df.latent_dim);
  df.denoiser_hidden = f.get_size("diffusion.denoiser_hidden", df.denoiser_hidden);
  df.flow_layers = f.get_size("diffusion.flow_layers", df.flow_layers);
  df.flow_hidden = f.get_size("diffusion.flow_hidden", df.flow_hidden);
  df.epochs = f.get_size("diffusion.epochs", df.epochs);
  df.batch_size = f.get_size("diffusion.batch_size", df.batch_size);
  df.lr = f.get_double("diffusion.lr", df.lr);
  df.warmup_steps = f.get_size("diffusion.warmup_steps", df.warmup_steps);
  df.prior_weight = f.get_double("diffusion.prior_weight", df.prior_weight);
  df.points_per_sample = f.get_size("diffusion.points_per_sample", df.points_per_sample);
  df.seed = f.get_u64("diffusion.seed", s + 100);

  auto& a = c.diffusion_attack;
  a.t_attack = f.get_size("attack.diffusion.t_attack", a.t_attack);
  a.opt_iters = f.get_size("attack.diffusion.opt_iters", a.opt_iters);
  a.lambda_dcd = f.get_double("attack.diffusion.lambda_dcd", a.lambda_dcd);
  a.lambda_mse = f.get_double("attack.diffusion.lambda_mse", a.lambda_mse);
  a.opt_lr = f.get_double("attack.diffusion.opt_lr", a.opt_lr);
  a.noise_scale = f.get_double("attack.diffusion.noise_scale", a.noise_scale);
  a.dcd_alpha = f.get_double("attack.diffusion.dcd_alpha", a.dcd_alpha);
  a.seed = f.get_u64("attack.diffusion.seed", s + 200);
  const auto mode = f.get_string("attack.diffusion.noise_mode", "per_step_linear");
  if (mode == "constant") {
    a.noise_mode = attack::NoiseMode::constant;
  } else if (mode == "per_step_linear") {
    a.noise_mode = attack::NoiseMode::per_step_linear;
  } else {
    throw ConfigError("attack.diffusion.noise_mode: unknown mode '" + mode + "'");
  }

  c.fgsm = read_baseline(f, "attack.fgsm", s + 300);
  c.ifgsm = read_baseline(f, "attack.ifgsm", s + 301);
  c.pgd = read_baseline(f, "attack.pgd", s + 302);

  c.sor.k = f.get_size("defense.sor.k", c.sor.k);
  c.sor.alpha = f.get_double("defense.sor.alpha", c.sor.alpha);
  c.srs.drop_n = f.get_size("defense.srs.drop_n", c.dataset.points / 4);
  c.srs.seed = f.get_u64("defense.srs.seed", s + 400);

  const auto unread = f.unread_keys();
  if (!unread.empty()) throw ConfigError("unknown config key '" + unread.front() + "'");
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  const auto& d = c.dataset;
  if (d.classes < 2 || d.classes > kNumShapeKinds)
    fail("dataset.classes must be in [2, " + std::to_string(kNumShapeKinds) + "]");
  if (d.points < 8) fail("dataset.points must be at least 8");
  if (d.train_per_class == 0) fail("dataset.train_per_class must be positive");
  const auto test_count = d.classes * d.test_per_class;
  if (test_count < 50) fail("test set must hold at least 50 clouds, got " + std::to_string(test_count));
  if (c.eval_count != 0 && (c.eval_count < 50 || c.eval_count > test_count))
    fail("experiment.eval_count must be 0 or in [50, test count]");
  if (!(d.scale_lo > 0.0 && d.scale_lo <= d.scale_hi)) fail("dataset scale range invalid");
  if (d.jitter_sigma < 0.0 || d.jitter_clip < 0.0) fail("dataset jitter must be non-negative");
  if (c.workers == 0) fail("workers must be positive");

  auto check_arch = [&](const ClassifierSpec& s) {
    try {
      nn::Architecture::by_name(s.arch, d.classes);
    } catch (const Error& e) {
      fail("classifier '" + s.name + "': " + e.what());
    }
    if (s.train.epochs == 0 || s.train.batch_size == 0) fail("classifier '" + s.name + "': empty training schedule");
  };
  check_arch(c.proxy);
  bool distinct = false;
  for (const auto& t : c.targets) {
    check_arch(t);
    if (t.name == c.proxy.name) fail("target '" + t.name + "' shares the proxy's name");
    if (t.arch != c.proxy.arch || t.train.seed != c.proxy.train.seed) distinct = true;
  }
  if (!distinct) fail("at least one target must differ from the proxy");

  const auto& a = c.diffusion_attack;
  if (a.t_attack == 0 || a.t_attack > c.diffusion.steps) fail("attack.diffusion.t_attack must be in [1, diffusion.steps]");
  if (c.diffusion.epochs == 0) fail("diffusion.epochs must be positive");
  for (const auto& name : c.attacks)
    if (name != "none" && name != "diffusion" && name != "fgsm" && name != "ifgsm" && name != "pgd")
      fail("unknown attack '" + name + "'");
  for (const auto& name : c.defenses)
    if (name != "none" && name != "sor" && name != "srs") fail("unknown defense '" + name + "'");
  if (c.attacks.empty() || c.defenses.empty()) fail("attack and defense lists must not be empty");
  if (c.srs.drop_n >= d.points) fail("defense.srs.drop_n must be below dataset.points");
  if (c.sor.k == 0 || c.sor.k >= d.points) fail("defense.sor.k must be in [1, points)");
}

}  // namespace advpc::harness
