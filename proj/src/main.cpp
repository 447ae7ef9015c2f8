#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "gaz/oracle.hpp"
#include "gaz/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gaz;

namespace {

constexpr const char* kVersion = "gazplan 0.1.0";

/// Config or argument problems; mapped to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string isoNow() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setfill('0') << std::setw(16) << v;
  return ss.str();
}

/// Paths from gen/train land under $GAZPLAN_OUT when set and the path is
/// relative; absolute paths and other commands are untouched.
fs::path resolveOut(const std::string& dir) {
  fs::path p(dir);
  const char* root = std::getenv("GAZPLAN_OUT");
  if (p.is_relative() && root && *root) return fs::path(root) / p;
  return p;
}

// ---------------------------------------------------------------------------
// config file

struct CliConfig {
  std::string env;      // "tsp" | "jssp"
  std::string variant;  // parseVariant key
  int n = 0;            // tsp nodes
  int k = 0, m = 0;     // jssp jobs x machines
  TrainConfig train;
  nn::NetConfig net;
  int nSim = 50;
  int mRoot = 16;
  Real cVisit = 50.0;
  Real cScale = 1.0;
  std::string outDir = ".";
  bool stepsGiven = false;
};

const std::map<std::string, int>& knownKeys() {
  static const std::map<std::string, int> k = {
      {"env", 0},        {"variant", 0},         {"gamma", 0},
      {"episodes", 0},   {"seed", 0},            {"n", 0},
      {"k", 0},          {"m", 0},               {"arena_period", 0},
      {"arena_size", 0}, {"validation_size", 0}, {"batch_size", 0},
      {"steps_per_episode", 0},                  {"checkpoint_period", 0},
      {"workers", 0},    {"replay_capacity", 0}, {"augment", 0},
      {"lr", 0},         {"n_sim", 0},           {"m_root", 0},
      {"c_visit", 0},    {"c_scale", 0},         {"n_step", 0},
      {"tb_samples", 0}, {"dim", 0},             {"heads", 0},
      {"blocks", 0},     {"job_blocks", 0},      {"init_seed", 0},
      {"out_dir", 0}};
  return k;
}

json readJson(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw UsageError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw UsageError("config root must be a JSON object");
  return j;
}

/// Validates the whole file and reports every bad key at once.
CliConfig parseConfig(const json& j) {
  std::vector<std::string> errs;
  CliConfig c;

  for (auto it = j.begin(); it != j.end(); ++it)
    if (!knownKeys().count(it.key())) errs.push_back("unknown key: " + it.key());

  auto need = [&](const char* key) {
    if (!j.contains(key)) {
      errs.push_back(std::string("missing required key: ") + key);
      return false;
    }
    return true;
  };
  auto num = [&](const char* key, Real lo, Real hi, Real def, bool required = false) -> Real {
    if (!j.contains(key)) {
      if (required) errs.push_back(std::string("missing required key: ") + key);
      return def;
    }
    if (!j[key].is_number()) {
      errs.push_back(std::string("key ") + key + " must be a number");
      return def;
    }
    Real v = j[key].get<Real>();
    if (v < lo || v > hi) {
      std::ostringstream ss;
      ss << "key " << key << " must be in [" << lo << ", " << hi << "]";
      errs.push_back(ss.str());
      return def;
    }
    return v;
  };
  auto integer = [&](const char* key, long lo, long hi, long def, bool required = false) -> long {
    if (!j.contains(key)) {
      if (required) errs.push_back(std::string("missing required key: ") + key);
      return def;
    }
    if (!j[key].is_number_integer()) {
      errs.push_back(std::string("key ") + key + " must be an integer");
      return def;
    }
    long v = j[key].get<long>();
    if (v < lo || v > hi) {
      std::ostringstream ss;
      ss << "key " << key << " must be in [" << lo << ", " << hi << "]";
      errs.push_back(ss.str());
      return def;
    }
    return v;
  };

  if (need("env")) {
    c.env = j["env"].is_string() ? j["env"].get<std::string>() : "";
    if (c.env != "tsp" && c.env != "jssp") errs.push_back("key env must be \"tsp\" or \"jssp\"");
  }
  if (need("variant")) {
    c.variant = j["variant"].is_string() ? j["variant"].get<std::string>() : "";
    try {
      nn::parseVariant(c.variant);
    } catch (const std::exception&) {
      errs.push_back("key variant must be one of ptp_st ptp_gt vanilla nstep greedy_scalar "
                     "tb_greedy tb_sampled");
    }
  }
  if (c.env == "tsp") c.n = int(integer("n", 2, 10000, 0, true));
  if (c.env == "jssp") {
    c.k = int(integer("k", 1, 1000, 0, true));
    c.m = int(integer("m", 1, 1000, 0, true));
  }

  c.train.gamma = num("gamma", 0.0, 1.0, 0.2, true);
  if (c.train.gamma >= 1.0) errs.push_back("key gamma must be in [0, 1)");
  c.train.episodes = integer("episodes", 1, 100000000, 1500, true);
  c.train.seed = uint64_t(integer("seed", 0, std::numeric_limits<long>::max(), 42, true));

  c.train.arenaPeriod = int(integer("arena_period", 1, 1000000, 400));
  c.train.arenaSize = int(integer("arena_size", 1, 100000, 64));
  c.train.validationSize = int(integer("validation_size", 1, 100000, 16));
  c.train.batchSize = int(integer("batch_size", 1, 1000000, 256));
  c.stepsGiven = j.contains("steps_per_episode");
  c.train.stepsPerEpisode = num("steps_per_episode", 0.0, 1e6, 1.0);
  c.train.checkpointPeriod = int(integer("checkpoint_period", 1, 1000000, 100));
  c.train.workers = int(integer("workers", 1, 256, 1));
  c.train.replayCapacity = size_t(integer("replay_capacity", 1, 100000000, 2000));
  if (j.contains("augment") && !j["augment"].is_boolean())
    errs.push_back("key augment must be a boolean");
  else if (j.contains("augment"))
    c.train.augment = j["augment"].get<bool>();
  c.train.lr = num("lr", 1e-12, 1.0, 1e-4);
  c.nSim = int(integer("n_sim", 1, 100000, 50));
  c.mRoot = int(integer("m_root", 1, 100000, 16));
  c.cVisit = num("c_visit", 0.0, 1e9, 50.0);
  c.cScale = num("c_scale", 1e-12, 1e9, 1.0);
  c.train.nStep = int(integer("n_step", 1, 1000000, 20));
  c.train.tbSamples = int(integer("tb_samples", 0, 100000, 10));
  c.net.dim = int(integer("dim", 2, 4096, 32));
  c.net.heads = int(integer("heads", 1, 64, 2));
  c.net.blocks = int(integer("blocks", 1, 64, 2));
  c.net.jobBlocks = int(integer("job_blocks", 1, 64, 2));
  c.net.initSeed = uint64_t(integer("init_seed", 0, std::numeric_limits<long>::max(), 0));
  if (j.contains("out_dir") && !j["out_dir"].is_string())
    errs.push_back("key out_dir must be a string");
  else if (j.contains("out_dir"))
    c.outDir = j["out_dir"].get<std::string>();

  if (c.net.dim % c.net.heads != 0) errs.push_back("key dim must be divisible by heads");

  if (!errs.empty()) {
    std::ostringstream ss;
    ss << "config validation failed:";
    for (const auto& e : errs) ss << "\n  - " << e;
    throw UsageError(ss.str());
  }

  c.train.search.nSim = c.nSim;
  c.train.search.mRoot = c.mRoot;
  c.train.search.cVisit = c.cVisit;
  c.train.search.cScale = c.cScale;
  if (!c.stepsGiven)
    c.train.stepsPerEpisode =
        c.env == "tsp" ? tspStepRatio(c.n) : jsspStepRatio(c.k, c.m);
  return c;
}

json resolvedJson(const CliConfig& c) {
  json j;
  j["env"] = c.env;
  j["variant"] = c.variant;
  if (c.env == "tsp") j["n"] = c.n;
  if (c.env == "jssp") {
    j["k"] = c.k;
    j["m"] = c.m;
  }
  j["gamma"] = c.train.gamma;
  j["episodes"] = c.train.episodes;
  j["seed"] = c.train.seed;
  j["arena_period"] = c.train.arenaPeriod;
  j["arena_size"] = c.train.arenaSize;
  j["validation_size"] = c.train.validationSize;
  j["batch_size"] = c.train.batchSize;
  j["steps_per_episode"] = c.train.stepsPerEpisode;
  j["checkpoint_period"] = c.train.checkpointPeriod;
  j["workers"] = c.train.workers;
  j["replay_capacity"] = c.train.replayCapacity;
  j["augment"] = c.train.augment;
  j["lr"] = c.train.lr;
  j["n_sim"] = c.nSim;
  j["m_root"] = c.mRoot;
  j["c_visit"] = c.cVisit;
  j["c_scale"] = c.cScale;
  j["n_step"] = c.train.nStep;
  j["tb_samples"] = c.train.tbSamples;
  j["dim"] = c.net.dim;
  j["heads"] = c.net.heads;
  j["blocks"] = c.net.blocks;
  j["job_blocks"] = c.net.jobBlocks;
  j["init_seed"] = c.net.initSeed;
  j["out_dir"] = c.outDir;
  return j;
}

/// Digest of the shape-determining subset; stored in checkpoints so eval can
/// reject a mismatched network.
uint64_t archDigest(const CliConfig& c) {
  std::ostringstream ss;
  ss << c.env << '|' << c.n << '|' << c.k << 'x' << c.m << '|' << c.variant << '|' << c.net.dim
     << '|' << c.net.heads << '|' << c.net.blocks << '|' << c.net.jobBlocks;
  return fnv1a64(ss.str());
}

// ---------------------------------------------------------------------------
// gen

void cmdGen(const std::string& env, int n, int k, int m, int count, uint64_t seed,
            const std::string& outDir) {
  if (env != "tsp" && env != "jssp") throw UsageError("unknown env: " + env);
  if (env == "tsp" && n < 2) throw UsageError("tsp generation needs --n >= 2");
  if (env == "jssp" && (k < 1 || m < 1)) throw UsageError("jssp generation needs --k and --m");
  if (count < 1) throw UsageError("--count must be positive");

  fs::path dir = resolveOut(outDir);
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    uint64_t s = Rng::derive(seed, uint64_t(i)).bits();
    std::ostringstream name;
    name << "inst_" << std::setfill('0') << std::setw(4) << i;
    if (env == "tsp")
      tspWrite(tspGenerate(n, s), (dir / (name.str() + ".tsp")).string());
    else
      jsspWrite(jsspGenerate(k, m, s), (dir / (name.str() + ".jssp")).string());
  }
  std::cout << "wrote " << count << " instances to " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// train

template <class Env, class Net, class GenFn, class MakeNetFn>
void runTrain(const CliConfig& c, const GenFn& gen, const MakeNetFn& makeNet) {
  fs::path dir = resolveOut(c.outDir);
  fs::create_directories(dir);
  fs::path configPath = dir / "config.json";
  fs::path manifestPath = dir / "manifest.json";
  fs::path metricsPath = dir / "metrics.csv";
  fs::path checkpointPath = dir / "checkpoint.bin";

  json resolved = resolvedJson(c);
  {
    std::ofstream out(configPath);
    out << resolved.dump(2) << "\n";
    require(out.good(), "cannot write " + configPath.string());
  }
  json manifest;
  manifest["config_digest"] = hex64(fnv1a64(resolved.dump()));
  manifest["seed"] = c.train.seed;
  manifest["code_version"] = kVersion;
  manifest["started"] = isoNow();
  manifest["finished"] = nullptr;
  manifest["outputs"] = {{"config", configPath.string()},
                         {"metrics", metricsPath.string()},
                         {"checkpoint", checkpointPath.string()}};
  {
    std::ofstream out(manifestPath);
    out << manifest.dump(2) << "\n";
    require(out.good(), "cannot write " + manifestPath.string());
  }

  auto res = train<Env, Net>(gen, makeNet, c.train, metricsPath.string(), checkpointPath.string());

  manifest["finished"] = isoNow();
  {
    std::ofstream out(manifestPath);
    out << manifest.dump(2) << "\n";
    require(out.good(), "cannot write " + manifestPath.string());
  }
  std::cout << "episodes " << res.episodes << "  steps " << res.steps << "\n";
  std::cout << "best validation objective " << res.bestValidation << " at episode "
            << res.bestValidationEpisode << "\n";
  std::cout << "checkpoint " << checkpointPath.string() << "\n";
}

void cmdTrain(const CliConfig& c) {
  nn::Variant v = nn::parseVariant(c.variant);
  uint64_t digest = archDigest(c);
  if (c.env == "tsp") {
    int n = c.n;
    auto gen = [n](uint64_t s) { return tspGenerate(n, s); };
    auto makeNet = [&c, v, digest] {
      nn::TspNet net(c.net, v);
      net.params.setConfigDigest(digest);
      return net;
    };
    runTrain<TspEnv, nn::TspNet>(c, gen, makeNet);
  } else {
    int k = c.k, m = c.m;
    auto gen = [k, m](uint64_t s) { return jsspGenerate(k, m, s); };
    auto makeNet = [&c, v, digest, k, m] {
      nn::JsspNet net(c.net, v, k, m);
      net.params.setConfigDigest(digest);
      return net;
    };
    runTrain<JsspEnv, nn::JsspNet>(c, gen, makeNet);
  }
}

// ---------------------------------------------------------------------------
// eval / oracle shared plumbing

std::vector<fs::path> listInstances(const std::string& dir, const std::string& env) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw UsageError("instance directory not found: " + dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    if (env == "tsp" && ext == ".tsp") files.push_back(e.path());
    if (env == "jssp" && (ext == ".jssp" || ext == ".txt")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no " + env + " instances in " + dir);
  return files;
}

std::map<std::string, Real> readBounds(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw UsageError("cannot open bounds file: " + path);
  std::map<std::string, Real> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, value;
    std::getline(ss, name, ',');
    std::getline(ss, value, ',');
    try {
      out[name] = std::stod(value);
    } catch (const std::exception&) {
      continue;  // header or comment row
    }
  }
  if (out.empty()) throw UsageError("bounds file has no usable rows: " + path);
  return out;
}

void printTable(const std::vector<GapReport>& rows, const std::vector<long>& sims,
                std::ostream& os) {
  os << std::left << std::setw(14) << "instance" << std::right << std::setw(12) << "objective"
     << std::setw(12) << "reference" << std::setw(10) << "gap%" << std::setw(8) << "sims"
     << "\n";
  Real mObj = 0, mRef = 0, mGap = 0, mSims = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << std::left << std::setw(14) << r.id << std::right << std::fixed << std::setprecision(3)
       << std::setw(12) << r.method << std::setw(12) << r.reference << std::setw(10)
       << r.gap * 100 << std::setw(8) << sims[i] << (r.anomaly ? "  !" : "") << "\n";
    mObj += r.method;
    mRef += r.reference;
    mGap += r.gap;
    mSims += Real(sims[i]);
  }
  Real n = Real(rows.size());
  os << std::left << std::setw(14) << "mean" << std::right << std::setw(12) << mObj / n
     << std::setw(12) << mRef / n << std::setw(10) << (mGap / n) * 100 << std::setw(8)
     << long(mSims / n) << "\n";
  os.unsetf(std::ios::fixed);
  os << std::setprecision(6);
}

void writeCsv(const std::vector<GapReport>& rows, const std::vector<long>& sims,
              const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << std::setprecision(12);
  out << "instance,objective,reference,ref_exact,gap,sims\n";
  Real mObj = 0, mRef = 0, mGap = 0, mSims = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << r.id << ',' << r.method << ',' << r.reference << ',' << (r.anomaly ? "!" : "") << ','
        << r.gap << ',' << sims[i] << "\n";
    mObj += r.method;
    mRef += r.reference;
    mGap += r.gap;
    mSims += Real(sims[i]);
  }
  Real n = Real(rows.size());
  out << "mean," << mObj / n << ',' << mRef / n << ",," << mGap / n << ',' << long(mSims / n)
      << "\n";
  require(out.good(), "csv write failed: " + path);
}

struct EvalArgs {
  std::string configPath, checkpoint, instances, bounds, out;
  int nSim = 0;
  uint64_t seed = 0;
  long budget = 200000;
  Real scale = 0;  // 0 = auto: 100 for Taillard-format files, 1 otherwise
};

// ---------------------------------------------------------------------------
// eval

void cmdEval(const EvalArgs& a) {
  CliConfig c = parseConfig(readJson(a.configPath));
  nn::Variant v = nn::parseVariant(c.variant);
  nn::ParameterSet loaded = nn::ParameterSet::load(a.checkpoint);
  require(loaded.configDigest() == archDigest(c),
          "incompatible checkpoint: config digest mismatch");

  std::map<std::string, Real> bounds;
  if (!a.bounds.empty()) bounds = readBounds(a.bounds);

  SearchConfig scfg = c.train.search;
  SpConfig spc;
  spc.search = scfg;
  spc.nStep = c.train.nStep;
  spc.tbSamples = c.train.tbSamples;

  std::vector<GapReport> rows;
  std::vector<long> sims;
  auto files = listInstances(a.instances, c.env);

  if (c.env == "tsp") {
    nn::TspNet net(c.net, v);
    require(net.params.sameShape(loaded), "incompatible checkpoint: parameter shapes differ");
    net.params = loaded;
    nn::TspNet muNet = net;
    for (size_t i = 0; i < files.size(); ++i) {
      TspInstance inst = tspRead(files[i].string());
      TspEnv env(inst);
      SolveResult<TspEnv> r;
      if (nn::isPtp(v))
        r = evalSolvePtp(env, net, muNet, scfg, a.nSim, Rng::derive(a.seed, i).bits());
      else
        r = evalSolveSp(env, net, muNet, spc, a.nSim, Rng::derive(a.seed, i).bits());
      std::string stem = files[i].stem().string();
      bool exactOk = inst.n() <= 18;
      Real ref = 0;
      bool exact = false;
      if (exactOk) {
        ref = heldKarp(inst);
        exact = true;
      } else {
        auto it = bounds.find(stem);
        if (it == bounds.end())
          throw UsageError("no reference for " + stem + ": n > 18 needs a bounds file");
        ref = it->second;
      }
      Real scale = a.scale > 0 ? a.scale : 1.0;
      rows.push_back(gapReport(stem, r.objective * scale, ref, exact));
      sims.push_back(r.sims);
    }
  } else {
    nn::JsspNet net(c.net, v, c.k, c.m);
    require(net.params.sameShape(loaded), "incompatible checkpoint: parameter shapes differ");
    net.params = loaded;
    nn::JsspNet muNet = net;
    for (size_t i = 0; i < files.size(); ++i) {
      bool taillard = files[i].extension() != ".jssp";
      JsspInstance inst =
          taillard ? parseTaillard(files[i].string()) : jsspRead(files[i].string());
      require(inst.k == c.k && inst.m == c.m,
              "instance " + files[i].stem().string() + " does not match the configured k x m");
      JsspEnv env(inst);
      SolveResult<JsspEnv> r;
      if (nn::isPtp(v))
        r = evalSolvePtp(env, net, muNet, scfg, a.nSim, Rng::derive(a.seed, i).bits());
      else
        r = evalSolveSp(env, net, muNet, spc, a.nSim, Rng::derive(a.seed, i).bits());
      std::string stem = files[i].stem().string();
      Real scale = a.scale > 0 ? a.scale : (taillard ? 100.0 : 1.0);
      Real ref = 0;
      bool exact = false;
      auto it = bounds.find(stem);
      if (inst.k * inst.m <= 12) {
        ref = jsspExact(inst).makespan * scale;
        exact = true;
      } else if (it != bounds.end()) {
        ref = it->second;
      } else {
        auto ex = jsspExact(inst, a.budget);
        ref = ex.makespan * scale;
        exact = ex.proven;
      }
      rows.push_back(gapReport(stem, r.objective * scale, ref, exact));
      sims.push_back(r.sims);
    }
  }

  printTable(rows, sims, std::cout);
  if (!a.out.empty()) writeCsv(rows, sims, a.out);
}

// ---------------------------------------------------------------------------
// oracle

void cmdOracle(const std::string& env, const std::string& instances, long budget, Real scaleArg,
               const std::string& outPath) {
  if (env != "tsp" && env != "jssp") throw UsageError("unknown env: " + env);
  auto files = listInstances(instances, env);

  std::ostringstream text;
  std::ostringstream csv;
  csv << std::setprecision(12);
  csv << "name,reference,exact,heuristic\n";
  text << std::left << std::setw(14) << "instance" << std::right << std::setw(12) << "reference"
       << std::setw(8) << "exact" << std::setw(12) << "heuristic"
       << "\n";
  for (const auto& f : files) {
    std::string stem = f.stem().string();
    Real ref = 0, heur = 0;
    bool exact = true;
    Real scale = scaleArg > 0 ? scaleArg : 1.0;
    if (env == "tsp") {
      TspInstance inst = tspRead(f.string());
      if (inst.n() > 18) throw UsageError("oracle cap: " + stem + " has n > 18");
      ref = heldKarp(inst);
      heur = nearestNeighborTsp(inst);
    } else {
      bool taillard = f.extension() != ".jssp";
      JsspInstance inst = taillard ? parseTaillard(f.string()) : jsspRead(f.string());
      if (scaleArg <= 0 && taillard) scale = 100.0;
      auto ex = jsspExact(inst, budget);
      ref = ex.makespan;
      exact = ex.proven;
      heur = sptJssp(inst);
    }
    csv << stem << ',' << ref * scale << ',' << (exact ? 1 : 0) << ',' << heur * scale << "\n";
    text << std::left << std::setw(14) << stem << std::right << std::fixed << std::setprecision(3)
         << std::setw(12) << ref * scale << std::setw(8) << (exact ? 1 : 0) << std::setw(12)
         << heur * scale << "\n";
    text.unsetf(std::ios::fixed);
  }
  std::cout << text.str();
  if (!outPath.empty()) {
    std::ofstream out(outPath);
    require(out.good(), "cannot write " + outPath);
    out << csv.str();
    require(out.good(), "csv write failed: " + outPath);
  }
}

// ---------------------------------------------------------------------------
// plotdata

void cmdPlotdata(const std::vector<std::string>& metricsFiles, long bucket,
                 const std::string& outPath) {
  if (bucket < 1) throw UsageError("--bucket must be positive");
  struct Key {
    std::string variant;
    long bucket;
    bool operator<(const Key& o) const {
      return variant != o.variant ? variant < o.variant : bucket < o.bucket;
    }
  };
  std::map<Key, std::vector<Real>> fileMeans;

  for (const auto& path : metricsFiles) {
    std::ifstream in(path);
    if (!in.good()) throw UsageError("cannot open metrics file: " + path);
    std::string header;
    std::getline(in, header);
    if (header != kMetricsHeader)
      throw UsageError("metrics header mismatch in " + path);
    std::map<Key, std::pair<Real, long>> acc;
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("episode,", 0) != 0) continue;
      std::istringstream ss(line);
      std::string kind, id, variant, learner;
      std::getline(ss, kind, ',');
      std::getline(ss, id, ',');
      std::getline(ss, variant, ',');
      std::getline(ss, learner, ',');
      long ep = std::stol(id);
      Real objective = -std::stod(learner);
      auto& slot = acc[{variant, ep / bucket}];
      slot.first += objective;
      slot.second += 1;
    }
    if (acc.empty()) throw UsageError("no episode rows in " + path);
    for (const auto& [key, slot] : acc) fileMeans[key].push_back(slot.first / Real(slot.second));
  }

  std::ostringstream csv;
  csv << std::setprecision(12);
  csv << "variant,bucket,episode_lo,episode_hi,mean_objective,stderr,files\n";
  for (const auto& [key, xs] : fileMeans) {
    Real n = Real(xs.size());
    Real mean = 0;
    for (Real x : xs) mean += x;
    mean /= n;
    Real se = 0;
    if (xs.size() > 1) {
      Real var = 0;
      for (Real x : xs) var += (x - mean) * (x - mean);
      se = std::sqrt(var / (n - 1)) / std::sqrt(n);
    }
    csv << key.variant << ',' << key.bucket << ',' << key.bucket * bucket << ','
        << (key.bucket + 1) * bucket - 1 << ',' << mean << ',' << se << ',' << xs.size() << "\n";
  }
  if (outPath.empty())
    std::cout << csv.str();
  else {
    std::ofstream out(outPath);
    require(out.good(), "cannot write " + outPath);
    out << csv.str();
    require(out.good(), "csv write failed: " + outPath);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazplan: neural-guided planning for TSP and JSSP"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate instance files");
  std::string genEnv, genOut = ".";
  int genN = 0, genK = 0, genM = 0, genCount = 0;
  uint64_t genSeed = 0;
  gen->add_option("--env", genEnv, "tsp or jssp")->required();
  gen->add_option("--n", genN, "tsp node count");
  gen->add_option("--k", genK, "jssp job count");
  gen->add_option("--m", genM, "jssp machine count");
  gen->add_option("--count", genCount, "number of instances")->required();
  gen->add_option("--seed", genSeed, "generation seed")->required();
  gen->add_option("--out", genOut, "output directory");

  auto* tr = app.add_subcommand("train", "train a model from a config file");
  std::string trConfig, trOut;
  long trSeed = 0, trEpisodes = 0;
  int trWorkers = 0;
  bool trDeterministic = false;
  tr->add_option("--config", trConfig, "JSON config path")->required();
  tr->add_option("--seed", trSeed, "override config seed");
  tr->add_option("--episodes", trEpisodes, "override episode count");
  tr->add_option("--workers", trWorkers, "override worker count");
  tr->add_flag("--deterministic", trDeterministic, "force synchronous single-worker mode");
  tr->add_option("--out", trOut, "override output directory");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on an instance set");
  EvalArgs ea;
  ev->add_option("--config", ea.configPath, "JSON config path")->required();
  ev->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  ev->add_option("--instances", ea.instances, "instance directory")->required();
  ev->add_option("--nsim", ea.nSim, "simulations per move; 0 = greedy unroll");
  ev->add_option("--seed", ea.seed, "evaluation seed");
  ev->add_option("--bounds", ea.bounds, "bounds csv (name,reference) for non-exact sizes");
  ev->add_option("--budget", ea.budget, "branch-and-bound node budget for jssp references");
  ev->add_option("--display-scale", ea.scale,
                 "multiply objectives for display; default 1, Taillard files 100");
  ev->add_option("--out", ea.out, "write the report csv here");

  auto* orc = app.add_subcommand("oracle", "run reference solvers on an instance set");
  std::string orEnv, orInstances, orOut;
  long orBudget = 200000;
  Real orScale = 0;
  orc->add_option("--env", orEnv, "tsp or jssp")->required();
  orc->add_option("--instances", orInstances, "instance directory")->required();
  orc->add_option("--budget", orBudget, "branch-and-bound node budget for jssp");
  orc->add_option("--display-scale", orScale,
                  "multiply objectives for display; default 1, Taillard files 100");
  orc->add_option("--out", orOut, "write the reference csv here");

  auto* pd = app.add_subcommand("plotdata", "aggregate metrics files into learning curves");
  std::vector<std::string> pdFiles;
  long pdBucket = 100;
  std::string pdOut;
  pd->add_option("files", pdFiles, "metrics csv files")->required()->expected(-1);
  pd->add_option("--bucket", pdBucket, "episodes per bucket");
  pd->add_option("--out", pdOut, "write the curve csv here; default stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen)) {
      cmdGen(genEnv, genN, genK, genM, genCount, genSeed, genOut);
    } else if (app.got_subcommand(tr)) {
      json raw = readJson(trConfig);
      if (tr->count("--seed")) raw["seed"] = trSeed;
      if (tr->count("--episodes")) raw["episodes"] = trEpisodes;
      if (tr->count("--workers")) raw["workers"] = trWorkers;
      if (trDeterministic) raw["workers"] = 1;
      if (tr->count("--out")) raw["out_dir"] = trOut;
      cmdTrain(parseConfig(raw));
    } else if (app.got_subcommand(ev)) {
      cmdEval(ea);
    } else if (app.got_subcommand(orc)) {
      cmdOracle(orEnv, orInstances, orBudget, orScale, orOut);
    } else if (app.got_subcommand(pd)) {
      cmdPlotdata(pdFiles, pdBucket, pdOut);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
