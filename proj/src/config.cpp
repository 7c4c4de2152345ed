#include "qualsim/config.hpp"

#include <filesystem>

#include "json.hpp"
#include "qualsim/io_util.hpp"

namespace qualsim {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const char* where) {
  const auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(where) + ": missing required key '" + key + "'");
  return *it;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
T as(const json& j, const char* key, const char* where) {
  try {
    return require(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + ": bad value for '" + key + "': " + e.what());
  }
}

// predicates: {"file": path} or {"source": text}
std::string load_predicate_source(const json& j, const std::string& base_dir,
                                  const char* where) {
  if (!j.is_object())
    throw ConfigError(std::string(where) + ": predicates must be an object with "
                                           "'file' or 'source'");
  if (j.contains("source")) return as<std::string>(j, "source", where);
  if (j.contains("file")) {
    const auto rel = as<std::string>(j, "file", where);
    std::filesystem::path p(rel);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    return read_text_file(p.string());
  }
  throw ConfigError(std::string(where) + ": predicates need 'file' or 'source'");
}

WeightSpec parse_weights(const json& j) {
  WeightSpec spec;
  const auto variant = as<std::string>(j, "variant", "weights");
  if (variant == "counting")
    spec.variant = WeightVariant::Counting;
  else if (variant == "typed")
    spec.variant = WeightVariant::Typed;
  else if (variant == "factorized")
    spec.variant = WeightVariant::Factorized;
  else
    throw ConfigError("weights.variant must be counting|typed|factorized");
  spec.beta = get_or<double>(j, "beta", 0.0);
  if (j.contains("betas")) {
    const auto& betas = j.at("betas");
    if (!betas.is_object()) throw ConfigError("weights.betas must map type -> beta");
    for (const auto& [name, value] : betas.items()) {
      if (!value.is_number())
        throw ConfigError("weights.betas['" + name + "'] must be a number");
      spec.type_betas[name] = value.get<double>();
    }
  }
  spec.validate();
  return spec;
}

json weights_to_json(const WeightSpec& spec) {
  json j;
  switch (spec.variant) {
    case WeightVariant::Counting:
      j["variant"] = "counting";
      break;
    case WeightVariant::Typed:
      j["variant"] = "typed";
      break;
    case WeightVariant::Factorized:
      j["variant"] = "factorized";
      break;
  }
  j["beta"] = spec.beta;
  if (!spec.type_betas.empty()) {
    json betas = json::object();
    for (const auto& [name, b] : spec.type_betas) betas[name] = b;
    j["betas"] = betas;
  }
  return j;
}

}  // namespace

Instance RunConfig::instance() const {
  if (evolve) return evolve->instance();
  Instance inst;
  inst.lattice = lattice;
  inst.substrate = substrate;
  inst.enumeration_cap = sampler.enumeration_cap;
  return inst;
}

QualiaRule RunConfig::rule() const {
  if (evolve) return evolve->rule();
  if (!program) throw ConfigError("config has no predicates");
  return whole_lattice_rule(program, lattice);
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  RunConfig cfg;

  const json& lat = require(root, "lattice", "config");
  cfg.lattice.spatial_dims = get_or<int>(lat, "spatial_dims", 1);
  const auto extent = as<std::vector<int>>(lat, "extent", "lattice");
  if (static_cast<int>(extent.size()) != cfg.lattice.spatial_dims)
    throw ConfigError("lattice.extent must list one entry per spatial dimension");
  cfg.lattice.extent = {1, 1, 1};
  for (std::size_t a = 0; a < extent.size(); ++a) cfg.lattice.extent[a] = extent[a];
  cfg.lattice.steps = as<int>(lat, "steps", "lattice");
  cfg.lattice.neighborhood_radius = get_or<int>(lat, "neighborhood_radius", 1);
  cfg.lattice.grouping_radius = get_or<int>(lat, "grouping_radius", 1);
  cfg.lattice.validate();

  const json& sub = require(root, "substrate", "config");
  cfg.substrate.theta = get_or<double>(sub, "theta", 0.0);
  cfg.substrate.collapse_rate = as<double>(sub, "collapse_rate", "substrate");
  cfg.substrate.initial = get_or<std::string>(
      sub, "initial", std::string(static_cast<std::size_t>(cfg.lattice.num_cells()), '0'));
  cfg.substrate.cell_cap = get_or<int>(sub, "cell_cap", 12);
  if (sub.contains("regions")) {
    for (const auto& r : sub.at("regions")) {
      RegionSpec rs;
      rs.start = as<int>(r, "start", "substrate.regions");
      rs.size = as<int>(r, "size", "substrate.regions");
      rs.theta = as<double>(r, "theta", "substrate.regions");
      cfg.substrate.regions.push_back(rs);
    }
  }

  if (root.contains("sampler")) {
    const json& smp = root.at("sampler");
    cfg.sampler.samples = get_or<long long>(smp, "samples", cfg.sampler.samples);
    cfg.sampler.seed = get_or<std::uint64_t>(smp, "seed", cfg.sampler.seed);
    cfg.sampler.enumeration_cap =
        get_or<std::uint64_t>(smp, "enumeration_cap", cfg.sampler.enumeration_cap);
    cfg.sampler.ess_floor = get_or<double>(smp, "ess_floor", cfg.sampler.ess_floor);
    if (cfg.sampler.samples < 1) throw ConfigError("sampler.samples must be >= 1");
  }

  cfg.weights = parse_weights(require(root, "weights", "config"));
  cfg.output_dir = get_or<std::string>(root, "output_dir", cfg.output_dir);

  const dsl::ParseContext pctx{cfg.lattice.spatial_dims, cfg.lattice.neighborhood_radius};
  if (root.contains("predicates")) {
    cfg.program_source = load_predicate_source(root.at("predicates"), base_dir, "config");
    cfg.program = std::make_shared<const dsl::PredicateProgram>(
        dsl::parse_predicates(cfg.program_source, pctx));
  }

  if (root.contains("evolve")) {
    const json& ev = root.at("evolve");
    EvolveSetup setup;
    setup.lattice = cfg.lattice;
    setup.collapse_rate = cfg.substrate.collapse_rate;
    setup.cell_cap = cfg.substrate.cell_cap;
    setup.enumeration_cap = cfg.sampler.enumeration_cap;
    const json& motifs = require(ev, "motifs", "evolve");
    if (!motifs.is_array() || motifs.size() != 2)
      throw ConfigError("evolve.motifs must list exactly two motifs");
    MotifSpec* slots[2] = {&setup.first, &setup.second};
    for (int i = 0; i < 2; ++i) {
      const json& m = motifs[static_cast<std::size_t>(i)];
      MotifSpec& spec = *slots[i];
      spec.region_start = as<int>(m, "region_start", "motif");
      spec.region_size = as<int>(m, "region_size", "motif");
      spec.pattern = as<std::string>(m, "pattern", "motif");
      spec.theta = as<double>(m, "theta", "motif");
      spec.program_source =
          load_predicate_source(require(m, "predicates", "motif"), base_dir, "motif");
      spec.program = std::make_shared<const dsl::PredicateProgram>(
          dsl::parse_predicates(spec.program_source, pctx));
    }
    setup.validate();
    cfg.evolve = std::move(setup);
    cfg.evolve_betas = get_or<std::vector<double>>(ev, "betas", {0.0});
    cfg.evolve_samples = get_or<long long>(ev, "samples", 0);
    if (cfg.evolve_samples < 0) throw ConfigError("evolve.samples must be >= 0");
  }

  // cross-field consistency for the plain instance
  if (!cfg.evolve) cfg.substrate.validate(cfg.lattice);
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  const std::string text = read_text_file(path);
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return from_json_text(text, dir.empty() ? "." : dir);
}

std::string RunConfig::echo_json() const {
  json root;
  json lat;
  lat["spatial_dims"] = lattice.spatial_dims;
  std::vector<int> extent;
  for (int a = 0; a < lattice.spatial_dims; ++a) extent.push_back(lattice.extent[a]);
  lat["extent"] = extent;
  lat["steps"] = lattice.steps;
  lat["neighborhood_radius"] = lattice.neighborhood_radius;
  lat["grouping_radius"] = lattice.grouping_radius;
  root["lattice"] = lat;

  json sub;
  sub["theta"] = substrate.theta;
  sub["collapse_rate"] = substrate.collapse_rate;
  sub["initial"] = substrate.initial;
  sub["cell_cap"] = substrate.cell_cap;
  if (!substrate.regions.empty()) {
    json regions = json::array();
    for (const auto& r : substrate.regions)
      regions.push_back({{"start", r.start}, {"size", r.size}, {"theta", r.theta}});
    sub["regions"] = regions;
  }
  root["substrate"] = sub;

  json smp;
  smp["samples"] = sampler.samples;
  smp["seed"] = sampler.seed;
  smp["enumeration_cap"] = sampler.enumeration_cap;
  smp["ess_floor"] = sampler.ess_floor;
  root["sampler"] = smp;

  root["weights"] = weights_to_json(weights);
  root["output_dir"] = output_dir;
  if (program) root["predicates"] = {{"source", program_source}};

  if (evolve) {
    json ev;
    ev["betas"] = evolve_betas;
    ev["samples"] = evolve_samples;
    json motifs = json::array();
    for (const MotifSpec* m : {&evolve->first, &evolve->second}) {
      json mj;
      mj["region_start"] = m->region_start;
      mj["region_size"] = m->region_size;
      mj["pattern"] = m->pattern;
      mj["theta"] = m->theta;
      mj["predicates"] = {{"source", m->program_source}};
      motifs.push_back(mj);
    }
    ev["motifs"] = motifs;
    root["evolve"] = ev;
  }
  return root.dump(2) + "\n";
}

}  // namespace qualsim
