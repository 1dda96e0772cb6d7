// SPDX-License-Identifier: Apache-2.0
#include "gnot/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gnot/errors.hpp"

namespace gnot {

namespace {

std::string num(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

std::uint64_t to_uint(const std::string& what, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(what + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

double to_double(const std::string& what, const std::string& v) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(what + ": expected a number, got '" + v + "'");
  return x;
}

std::string join(const std::vector<std::string>& errs) {
  std::string msg;
  for (const auto& e : errs) msg += (msg.empty() ? "" : "\n") + e;
  return msg;
}

}  // namespace

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  const std::string w = where(section, key);
  auto u = [&] { return static_cast<std::size_t>(to_uint(w, value)); };
  auto d = [&] { return to_double(w, value); };

  if (section.empty()) {
    if (key == "seed") seed = to_uint(w, value);
    else throw ConfigError(w + ": unknown key");
  } else if (section == "model") {
    if (key == "embed") model.embed = u();
    else if (key == "heads") model.heads = u();
    else if (key == "experts") model.experts = u();
    else if (key == "layers") model.layers = u();
    else if (key == "encoder_layers") model.encoder_layers = u();
    else if (key == "ffn_hidden") model.ffn_hidden = u();
    else if (key == "gate_hidden") model.gate_hidden = u();
    else if (key == "order") {
      try {
        model.order = parse_block_order(value);
      } catch (const ConfigError& e) {
        throw ConfigError("model." + std::string(e.what()));
      }
    } else if (key == "gate") {
      try {
        model.gate = parse_gate_mode(value);
      } catch (const ConfigError& e) {
        throw ConfigError("model." + std::string(e.what()));
      }
    } else if (key == "gate_axis") model.gate_axis = u();
    else if (key == "gate_thresholds") {
      model.gate_thresholds.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) model.gate_thresholds.push_back(to_double(w, item));
    } else throw ConfigError(w + ": unknown key");
  } else if (section == "data") {
    if (key == "task") data.task = value;
    else if (key == "train_path") data.train_path = value;
    else if (key == "test_path") data.test_path = value;
    else if (key == "n_train") data.n_train = u();
    else if (key == "n_test") data.n_test = u();
    else if (key == "points") data.points = u();
    else if (key == "k_max") data.k_max = u();
    else if (key == "seed") data.seed = to_uint(w, value);
    else throw ConfigError(w + ": unknown key");
  } else if (section == "train") {
    if (key == "epochs") train.epochs = u();
    else if (key == "batch_size") train.batch_size = u();
    else if (key == "max_lr") train.max_lr = d();
    else if (key == "weight_decay") train.weight_decay = d();
    else if (key == "schedule") {
      if (value == "onecycle") {
        if (!std::holds_alternative<OneCycle>(train.schedule)) train.schedule = OneCycle{};
      } else if (value == "exponential") {
        if (!std::holds_alternative<ExponentialDecay>(train.schedule)) train.schedule = ExponentialDecay{};
      } else {
        throw ConfigError(w + ": expected onecycle or exponential, got '" + value + "'");
      }
    } else if (key == "div_factor" || key == "final_div_factor" || key == "pct_warmup") {
      if (!std::holds_alternative<OneCycle>(train.schedule))
        throw ConfigError(w + ": only valid with schedule = onecycle");
      auto& oc = std::get<OneCycle>(train.schedule);
      (key == "div_factor" ? oc.div_factor : key == "final_div_factor" ? oc.final_div_factor
                                                                       : oc.pct_warmup) = d();
    } else if (key == "gamma") {
      if (!std::holds_alternative<ExponentialDecay>(train.schedule))
        throw ConfigError(w + ": only valid with schedule = exponential");
      std::get<ExponentialDecay>(train.schedule).gamma = d();
    } else if (key == "grad_clip") train.grad_clip_norm = d();
    else if (key == "validation_fraction") train.validation_fraction = d();
    else throw ConfigError(w + ": unknown key");
  } else if (section == "output") {
    if (key == "dir") out_dir = value;
    else throw ConfigError(w + ": unknown key");
  } else {
    throw ConfigError("[" + section + "]: unknown section");
  }
}

RunConfig RunConfig::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }
  RunConfig cfg;
  std::vector<std::string> errs;
  // The schedule decides which keys are legal, so apply it first.
  for (const auto& [section, body] : tree)
    if (section == "train")
      if (auto s = body.get_optional<std::string>("schedule")) {
        try {
          cfg.set("train", "schedule", *s);
        } catch (const ConfigError& e) {
          errs.push_back(e.what());
        }
      }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      // An empty section parses exactly like a top-level key with no value.
      if (node.data().empty() &&
          (name == "model" || name == "data" || name == "train" || name == "output"))
        continue;
      try {
        cfg.set("", name, node.data());
      } catch (const ConfigError& e) {
        errs.push_back(e.what());
      }
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (name == "train" && key == "schedule") continue;
      try {
        cfg.set(name, key, leaf.data());
      } catch (const ConfigError& e) {
        errs.push_back(e.what());
      }
    }
  }
  if (!errs.empty()) throw ConfigError(join(errs));
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
  std::vector<std::string> errs;
  std::vector<std::string> ordered;
  // Schedule switches first, for the same reason as in parse().
  for (const auto& o : overrides)
    if (o.rfind("train.schedule=", 0) == 0) ordered.push_back(o);
  for (const auto& o : overrides)
    if (o.rfind("train.schedule=", 0) != 0) ordered.push_back(o);
  for (const auto& o : ordered) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      errs.push_back("override '" + o + "': expected section.key=value");
      continue;
    }
    const std::string lhs = o.substr(0, eq);
    const auto dot = lhs.find('.');
    try {
      if (dot == std::string::npos) set("", lhs, o.substr(eq + 1));
      else set(lhs.substr(0, dot), lhs.substr(dot + 1), o.substr(eq + 1));
    } catch (const ConfigError& e) {
      errs.push_back(e.what());
    }
  }
  if (!errs.empty()) throw ConfigError(join(errs));
}

void RunConfig::validate() const {
  std::vector<std::string> errs;
  if (data.task != "antiderivative" && data.task != "multiscale" && data.task != "file")
    errs.push_back("data.task: expected antiderivative, multiscale or file, got '" + data.task + "'");
  if (data.task == "file" && data.train_path.empty())
    errs.push_back("data.train_path: required when data.task = file");
  if (data.task != "file") {
    if (data.n_train < 1) errs.push_back("data.n_train: must be at least 1");
    const std::size_t min_points = data.task == "multiscale" ? 4 : 2;
    if (data.points < min_points)
      errs.push_back("data.points: must be at least " + std::to_string(min_points));
    if (data.task == "antiderivative" && data.k_max < 1) errs.push_back("data.k_max: must be at least 1");
  }
  try {
    train.validate();
  } catch (const ConfigError& e) {
    std::stringstream ss(e.what());
    std::string item;
    while (std::getline(ss, item, ';')) {
      while (!item.empty() && item.front() == ' ') item.erase(item.begin());
      errs.push_back("train." + item);
    }
  }
  ModelConfig probe;
  probe.slots = {{InputKind::DistributedFunction, 1}};
  probe.dim = std::max<std::size_t>(1, model.gate_axis + 1);
  DatasetHeader h;
  h.dim = probe.dim;
  h.slots = probe.slots;
  const ModelConfig mc = model_config(h);
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  check(mc.embed >= 1, "model.embed: must be at least 1");
  check(mc.heads >= 1 && mc.embed % std::max<std::size_t>(mc.heads, 1) == 0,
        "model.heads: " + std::to_string(mc.heads) + " does not divide embed " + std::to_string(mc.embed));
  check(mc.experts >= 1, "model.experts: must be at least 1");
  check(mc.layers >= 1, "model.layers: must be at least 1");
  check(mc.encoder_layers >= 1, "model.encoder_layers: must be at least 1");
  check(mc.gate_hidden >= 1, "model.gate_hidden: must be at least 1");
  check(mc.gate != GateMode::None || mc.experts == 1,
        "model.experts: gate = none is a plain FFN and needs experts = 1");
  check(mc.gate != GateMode::Handcrafted || mc.handcrafted.thresholds.size() + 1 == mc.experts,
        "model.gate_thresholds: need experts - 1 thresholds for a handcrafted gate");
  if (!errs.empty()) throw ConfigError(join(errs));
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n\n[model]\n"
     << "embed = " << model.embed << '\n'
     << "heads = " << model.heads << '\n'
     << "experts = " << model.experts << '\n'
     << "layers = " << model.layers << '\n'
     << "encoder_layers = " << model.encoder_layers << '\n'
     << "ffn_hidden = " << model.ffn_hidden << '\n'
     << "gate_hidden = " << model.gate_hidden << '\n'
     << "order = " << block_order_name(model.order) << '\n'
     << "gate = " << gate_mode_name(model.gate) << '\n'
     << "gate_axis = " << model.gate_axis << '\n'
     << "gate_thresholds = ";
  for (std::size_t i = 0; i < model.gate_thresholds.size(); ++i)
    os << (i ? "," : "") << num(model.gate_thresholds[i]);
  os << "\n\n[data]\n"
     << "task = " << data.task << '\n'
     << "train_path = " << data.train_path.string() << '\n'
     << "test_path = " << data.test_path.string() << '\n'
     << "n_train = " << data.n_train << '\n'
     << "n_test = " << data.n_test << '\n'
     << "points = " << data.points << '\n'
     << "k_max = " << data.k_max << '\n'
     << "seed = " << data.seed << "\n\n[train]\n"
     << "epochs = " << train.epochs << '\n'
     << "batch_size = " << train.batch_size << '\n'
     << "max_lr = " << num(train.max_lr) << '\n'
     << "weight_decay = " << num(train.weight_decay) << '\n';
  if (const auto* oc = std::get_if<OneCycle>(&train.schedule)) {
    os << "schedule = onecycle\n"
       << "div_factor = " << num(oc->div_factor) << '\n'
       << "final_div_factor = " << num(oc->final_div_factor) << '\n'
       << "pct_warmup = " << num(oc->pct_warmup) << '\n';
  } else {
    os << "schedule = exponential\n"
       << "gamma = " << num(std::get<ExponentialDecay>(train.schedule).gamma) << '\n';
  }
  os << "grad_clip = " << num(train.grad_clip_norm) << '\n'
     << "validation_fraction = " << num(train.validation_fraction) << "\n\n[output]\n"
     << "dir = " << out_dir.string() << '\n';
  return os.str();
}

ModelConfig RunConfig::model_config(const DatasetHeader& header) const {
  ModelConfig c;
  c.dim = header.dim;
  c.out_dim = header.out_dim;
  c.slots = header.slots;
  c.embed = model.embed;
  c.heads = model.heads;
  c.experts = model.experts;
  c.layers = model.layers;
  c.encoder_layers = model.encoder_layers;
  c.ffn_hidden = model.ffn_hidden == 0 ? model.embed : model.ffn_hidden;
  c.gate_hidden = model.gate_hidden;
  c.order = model.order;
  c.gate = model.gate;
  c.handcrafted = {model.gate_axis, model.gate_thresholds};
  c.seed = seed;
  return c;
}

}  // namespace gnot
