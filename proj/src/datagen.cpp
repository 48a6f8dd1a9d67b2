#include "anticipate/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace anticipate {

namespace fs = std::filesystem;

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

int Grammar::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i].name == name) return static_cast<int>(i);
  throw InputError("grammar: unknown class name " + name);
}

void Grammar::validate() const {
  if (classes.empty()) throw InputError("grammar: no classes");
  if (tasks.empty()) throw InputError("grammar: no tasks");
  if (feature_dim < 1) throw InputError("grammar: feature_dim >= 1 required");
  std::vector<bool> reachable(classes.size(), false);
  for (const auto& c : classes)
    if (c.min_frames < 1 || c.max_frames < c.min_frames)
      throw InputError("grammar: bad duration range for " + c.name);
  for (const auto& t : tasks) {
    if (t.slots.empty()) throw InputError("grammar: empty task " + t.name);
    for (const auto& s : t.slots) {
      if (s.allowed.empty()) throw InputError("grammar: slot with no classes");
      if (s.include_prob <= 0.0 || s.include_prob > 1.0)
        throw InputError("grammar: slot probability out of (0,1]");
      for (int c : s.allowed) {
        if (c < 0 || c >= num_classes()) throw InputError("grammar: bad class index");
        reachable[static_cast<std::size_t>(c)] = true;
      }
    }
  }
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (!reachable[i]) throw InputError("grammar: unreachable class " + classes[i].name);
  for (const auto& r : rules)
    if (r.action < 0 || r.action >= num_classes() || r.precursor < 0 ||
        r.precursor >= num_classes())
      throw InputError("grammar: bad precursor rule");
  for (const auto& p : confusable)
    if (p.a < 0 || p.a >= num_classes() || p.b < 0 || p.b >= num_classes() ||
        p.a == p.b || p.cosine < 0.0 || p.cosine >= 1.0)
      throw InputError("grammar: bad confusable pair");
  if (progress < 0.0) throw InputError("grammar: progress must be >= 0");
  for (const auto& c : cues)
    if (c.cls < 0 || c.cls >= num_classes() || c.strength < 0.0)
      throw InputError("grammar: bad cue");
}

Grammar default_grammar() {
  Grammar g;
  g.feature_dim = 16;
  g.sigma = 0.5;
  g.progress = 0.6;
  auto cls = [&](const char* name, int mn, int mx) {
    g.classes.push_back(ActionClass{name, mn, mx});
    return static_cast<int>(g.classes.size() - 1);
  };
  int get_pan = cls("get_pan", 13, 16);
  int pour_oil = cls("pour_oil", 15, 18);
  int pour_milk = cls("pour_milk", 15, 18);
  int stir_dough = cls("stir_dough", 22, 25);
  int pour_dough = cls("pour_dough", 17, 20);
  int fry_pancake = cls("fry_pancake", 26, 29);
  int put_fridge = cls("put_fridge", 37, 40);
  int crack_egg = cls("crack_egg", 28, 31);
  int fry_egg = cls("fry_egg", 47, 51);
  int pour_coffee = cls("pour_coffee", 43, 46);
  int add_milk = cls("add_milk", 15, 18);
  int stir_coffee = cls("stir_coffee", 37, 40);

  auto req = [](int c) { return Slot{{c}, 1.0}; };
  g.tasks.push_back(Task{"pancake",
                         {req(get_pan), req(pour_oil), req(pour_milk), req(stir_dough),
                          req(pour_dough), req(fry_pancake)}});
  g.tasks.push_back(Task{"batter",
                         {req(get_pan), req(pour_milk), req(stir_dough), req(pour_dough),
                          req(put_fridge)}});
  g.tasks.push_back(
      Task{"fried_egg", {req(get_pan), req(crack_egg), req(pour_oil), req(fry_egg)}});
  g.tasks.push_back(Task{"coffee",
                         {req(pour_coffee), Slot{{add_milk}, 0.5}, req(stir_coffee)}});
  g.rules.push_back(PrecursorRule{fry_pancake, pour_oil});
  g.rules.push_back(PrecursorRule{fry_egg, pour_oil});
  // the evidence separating pancake from batter is pour_oil vs pour_milk in
  // the second slot; near-parallel prototypes make that evidence weak at
  // frame level so the anticipation objectives have to preserve it
  g.confusable.push_back(ConfusablePair{pour_oil, pour_milk, 0.9});
  // whether the optional add_milk happens is signalled only by a weak
  // additive cue in the preceding frames; frame labels are unaffected, so
  // recognition training has no reason to keep the cue around
  g.cues.push_back(IntentCue{add_milk, 0.5});
  g.validate();
  return g;
}

Grammar parse_grammar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("grammar: cannot open " + path);
  Grammar g;
  struct PendingRule {
    std::string action, precursor;
  };
  struct PendingConfusable {
    std::string a, b;
    double cosine;
  };
  struct PendingCue {
    std::string cls;
    double strength;
  };
  std::vector<PendingRule> pending;
  std::vector<PendingConfusable> pending_confusable;
  std::vector<PendingCue> pending_cues;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    auto fail = [&](const std::string& msg) {
      throw InputError("grammar " + path + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (key == "feature_dim") {
      if (!(ss >> g.feature_dim)) fail("feature_dim expects an integer");
    } else if (key == "sigma") {
      if (!(ss >> g.sigma)) fail("sigma expects a real");
    } else if (key == "progress") {
      if (!(ss >> g.progress)) fail("progress expects a real");
    } else if (key == "class") {
      ActionClass c;
      if (!(ss >> c.name >> c.min_frames >> c.max_frames))
        fail("class expects: name min_frames max_frames");
      g.classes.push_back(c);
    } else if (key == "task") {
      Task t;
      if (!(ss >> t.name)) fail("task expects a name");
      g.tasks.push_back(t);
    } else if (key == "slot") {
      if (g.tasks.empty()) fail("slot before any task");
      Slot s;
      std::string names;
      if (!(ss >> s.include_prob >> names)) fail("slot expects: prob class[,class...]");
      std::istringstream ns(names);
      std::string n;
      while (std::getline(ns, n, ',')) s.allowed.push_back(g.class_index(n));
      g.tasks.back().slots.push_back(s);
    } else if (key == "rule") {
      std::string action, kw, precursor;
      if (!(ss >> action >> kw >> precursor) || kw != "requires")
        fail("rule expects: <action> requires <precursor>");
      pending.push_back({action, precursor});
    } else if (key == "confusable") {
      std::string a, b;
      double c;
      if (!(ss >> a >> b >> c)) fail("confusable expects: <class> <class> <cosine>");
      pending_confusable.push_back({a, b, c});
    } else if (key == "cue") {
      std::string cls;
      double strength;
      if (!(ss >> cls >> strength)) fail("cue expects: <class> <strength>");
      pending_cues.push_back({cls, strength});
    } else {
      fail("unknown key: " + key);
    }
    std::string extra;
    if (ss >> extra) fail("trailing token: " + extra);
  }
  for (const auto& r : pending)
    g.rules.push_back(PrecursorRule{g.class_index(r.action), g.class_index(r.precursor)});
  for (const auto& p : pending_confusable)
    g.confusable.push_back(ConfusablePair{g.class_index(p.a), g.class_index(p.b), p.cosine});
  for (const auto& c : pending_cues)
    g.cues.push_back(IntentCue{g.class_index(c.cls), c.strength});
  g.validate();
  return g;
}

void write_grammar(const std::string& path, const Grammar& g) {
  std::ofstream os(path);
  if (!os) throw IoError("grammar: cannot write " + path);
  os << "feature_dim " << g.feature_dim << "\n";
  os << "sigma " << g.sigma << "\n";
  if (g.progress > 0.0) os << "progress " << g.progress << "\n";
  for (const auto& c : g.classes)
    os << "class " << c.name << " " << c.min_frames << " " << c.max_frames << "\n";
  for (const auto& t : g.tasks) {
    os << "task " << t.name << "\n";
    for (const auto& s : t.slots) {
      os << "slot " << s.include_prob << " ";
      for (std::size_t i = 0; i < s.allowed.size(); ++i) {
        if (i) os << ",";
        os << g.classes[static_cast<std::size_t>(s.allowed[i])].name;
      }
      os << "\n";
    }
  }
  for (const auto& r : g.rules)
    os << "rule " << g.classes[static_cast<std::size_t>(r.action)].name << " requires "
       << g.classes[static_cast<std::size_t>(r.precursor)].name << "\n";
  for (const auto& p : g.confusable)
    os << "confusable " << g.classes[static_cast<std::size_t>(p.a)].name << " "
       << g.classes[static_cast<std::size_t>(p.b)].name << " " << p.cosine << "\n";
  for (const auto& c : g.cues)
    os << "cue " << g.classes[static_cast<std::size_t>(c.cls)].name << " " << c.strength
       << "\n";
  if (!os) throw IoError("grammar: write failed for " + path);
}

std::vector<std::vector<double>> class_prototypes(const Grammar& g) {
  std::vector<std::vector<double>> protos;
  protos.reserve(g.classes.size());
  for (std::size_t c = 0; c < g.classes.size(); ++c) {
    std::mt19937_64 rng(0x50524F544FULL + c);  // prototype stream, class-keyed
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> p(static_cast<std::size_t>(g.feature_dim));
    double norm = 0.0;
    for (double& v : p) {
      v = dist(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : p) v /= norm;
    protos.push_back(std::move(p));
  }
  // rotate b into the plane spanned by (a, b) so that dot(a, b) is exactly
  // the declared cosine; a is left untouched
  for (const auto& pair : g.confusable) {
    const auto& a = protos[static_cast<std::size_t>(pair.a)];
    auto& b = protos[static_cast<std::size_t>(pair.b)];
    double ab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
    double wnorm = 0.0;
    std::vector<double> w(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      w[i] = b[i] - ab * a[i];
      wnorm += w[i] * w[i];
    }
    wnorm = std::sqrt(wnorm);
    if (wnorm < 1e-12) throw NumericError("class_prototypes: confusable pair is collinear");
    double s = std::sqrt(1.0 - pair.cosine * pair.cosine);
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = pair.cosine * a[i] + s * w[i] / wnorm;
  }
  return protos;
}

std::vector<double> progress_direction(const Grammar& g) {
  std::mt19937_64 rng(0x52414D50ULL);  // ramp stream
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> dir(static_cast<std::size_t>(g.feature_dim));
  double norm = 0.0;
  for (double& v : dir) {
    v = dist(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : dir) v /= norm;
  return dir;
}

std::vector<double> cue_direction(const Grammar& g, int cls) {
  std::mt19937_64 rng(0xC0EULL * 0x10001ULL + static_cast<std::uint64_t>(cls));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> dir(static_cast<std::size_t>(g.feature_dim));
  double norm = 0.0;
  for (double& v : dir) {
    v = dist(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : dir) v /= norm;
  return dir;
}

VideoSample sample_video(const Grammar& g, int task_id, std::uint64_t seed) {
  if (task_id < 0 || task_id >= static_cast<int>(g.tasks.size()))
    throw InputError("sample_video: invalid task_id");
  std::mt19937_64 rng(seed);
  const Task& task = g.tasks[static_cast<std::size_t>(task_id)];
  std::vector<int> chosen;
  std::vector<bool> seen(g.classes.size(), false);
  for (const auto& slot : task.slots) {
    bool include = slot.include_prob >= 1.0;
    if (!include) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      include = u(rng) < slot.include_prob;
    }
    if (!include) continue;
    std::vector<int> candidates;
    for (int c : slot.allowed) {
      bool ok = true;
      for (const auto& r : g.rules)
        if (r.action == c && !seen[static_cast<std::size_t>(r.precursor)]) ok = false;
      if (ok) candidates.push_back(c);
    }
    if (candidates.empty())
      throw InputError("sample_video: no class satisfies precursor rules in task " +
                       task.name);
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    int c = candidates[pick(rng)];
    chosen.push_back(c);
    seen[static_cast<std::size_t>(c)] = true;
  }

  VideoSample v;
  v.task_id = task_id;
  int t = 0;
  for (int c : chosen) {
    const ActionClass& cls = g.classes[static_cast<std::size_t>(c)];
    std::uniform_int_distribution<int> dur(cls.min_frames, cls.max_frames);
    int len = dur(rng);
    v.segments.push_back(Segment{c, t, t + len});
    for (int i = 0; i < len; ++i) v.frame_labels.push_back(c);
    t += len;
  }
  auto protos = class_prototypes(g);
  std::size_t D = static_cast<std::size_t>(g.feature_dim);
  std::size_t T = v.frame_labels.size();
  v.features = Tensor::zeros({D, T});
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t f = 0; f < T; ++f) {
    const auto& p = protos[static_cast<std::size_t>(v.frame_labels[f])];
    for (std::size_t d = 0; d < D; ++d)
      v.features.at(d, f) = p[d] + g.sigma * noise(rng);
  }
  if (g.progress > 0.0) {
    std::vector<double> dir = progress_direction(g);
    for (const auto& s : v.segments) {
      int len = s.end - s.start;
      for (int f = s.start; f < s.end; ++f) {
        double phase = len > 1 ? double(f - s.start) / (len - 1) - 0.5 : 0.0;
        for (std::size_t d = 0; d < D; ++d)
          v.features.at(d, static_cast<std::size_t>(f)) += g.progress * phase * dir[d];
      }
    }
  }
  for (const auto& cue : g.cues) {
    int start = -1;
    for (const auto& s : v.segments)
      if (s.label == cue.cls) {
        start = s.start;
        break;
      }
    if (start <= 0) continue;
    std::vector<double> dir = cue_direction(g, cue.cls);
    for (int f = 0; f < start; ++f)
      for (std::size_t d = 0; d < D; ++d)
        v.features.at(d, static_cast<std::size_t>(f)) += cue.strength * dir[d];
  }
  return v;
}

TrainExample make_train_example(const VideoSample& v, double alpha) {
  int T = v.num_frames();
  if (T < 10) throw InputError("make_train_example: video too short");
  int t_o = round_half_up(alpha * T);
  t_o = std::max(1, std::min(t_o, T - 1));
  int horizon = std::min(round_half_up(0.5 * T), T - t_o);
  if (horizon < 1) throw InputError("make_train_example: empty horizon");

  TrainExample ex;
  ex.t_o = t_o;
  ex.horizon_frames = horizon;
  std::size_t D = v.features.rows();
  ex.obs_features = Tensor::zeros({D, static_cast<std::size_t>(t_o)});
  for (std::size_t d = 0; d < D; ++d)
    for (int f = 0; f < t_o; ++f)
      ex.obs_features.at(d, static_cast<std::size_t>(f)) =
          v.features.at(d, static_cast<std::size_t>(f));
  ex.obs_labels.assign(v.frame_labels.begin(), v.frame_labels.begin() + t_o);

  for (const auto& s : v.segments) {
    int obs = std::min(s.end, t_o) - std::max(s.start, 0);
    if (obs > 0) {
      ex.observed.labels.push_back(s.label);
      ex.observed.rel_durations.push_back(static_cast<double>(obs) /
                                          static_cast<double>(t_o));
    }
    int lo = std::max(s.start, t_o), hi = std::min(s.end, t_o + horizon);
    if (hi > lo) {
      ex.future.labels.push_back(s.label);
      ex.future.rel_durations.push_back(static_cast<double>(hi - lo) /
                                        static_cast<double>(horizon));
    }
  }
  return ex;
}

std::vector<TrainExample> make_train_examples(const VideoSample& v,
                                              const std::vector<double>& obs_fracs) {
  std::vector<TrainExample> out;
  out.reserve(obs_fracs.size());
  for (double a : obs_fracs) out.push_back(make_train_example(v, a));
  return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("feature file: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_features(const std::string& path, const Tensor& features) {
  if (features.rank() != 2) throw DimensionError("write_features: D x T tensor expected");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_features: cannot write " + path);
  std::size_t D = features.rows(), T = features.cols();
  os.write("FEAT", 4);
  put_u32(os, static_cast<std::uint32_t>(D));
  put_u32(os, static_cast<std::uint32_t>(T));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) {
      float f = static_cast<float>(features.at(d, t));
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(os, bits);
    }
  if (!os) throw IoError("write_features: write failed for " + path);
}

Tensor read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_features: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FEAT", 4) != 0)
    throw IoError("read_features: bad magic in " + path);
  std::size_t D = get_u32(is), T = get_u32(is);
  Tensor out = Tensor::zeros({D, T});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) {
      std::uint32_t bits = get_u32(is);
      float f;
      std::memcpy(&f, &bits, 4);
      out.at(d, t) = static_cast<double>(f);
    }
  return out;
}

void write_dataset(const std::vector<VideoSample>& videos,
                   const std::vector<std::string>& train_ids,
                   const std::vector<std::string>& test_ids,
                   const std::vector<std::string>& class_names,
                   const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "splits");
  {
    std::ofstream os(fs::path(out_dir) / "mapping.txt");
    if (!os) throw IoError("write_dataset: cannot write mapping.txt");
    for (std::size_t i = 0; i < class_names.size(); ++i)
      os << i << " " << class_names[i] << "\n";
  }
  auto write_split = [&](const char* name, const std::vector<std::string>& ids) {
    std::ofstream os(fs::path(out_dir) / "splits" / name);
    if (!os) throw IoError(std::string("write_dataset: cannot write ") + name);
    for (const auto& id : ids) os << id << "\n";
  };
  write_split("train.txt", train_ids);
  write_split("test.txt", test_ids);
  for (const auto& v : videos) {
    write_features((fs::path(out_dir) / (v.id + ".feat")).string(), v.features);
    std::ofstream os(fs::path(out_dir) / (v.id + ".txt"));
    if (!os) throw IoError("write_dataset: cannot write labels for " + v.id);
    for (int c : v.frame_labels) os << class_names[static_cast<std::size_t>(c)] << "\n";
  }
}

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("load_dataset: cannot open " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<Segment> segments_from_labels(const std::vector<int>& labels) {
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < labels.size();) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    segs.push_back(Segment{labels[i], static_cast<int>(i), static_cast<int>(j)});
    i = j;
  }
  return segs;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  for (const auto& line : read_lines(fs::path(dir) / "mapping.txt")) {
    std::istringstream ss(line);
    int idx;
    std::string name;
    if (!(ss >> idx >> name)) throw IoError("load_dataset: malformed mapping.txt");
    if (idx != static_cast<int>(ds.class_names.size()))
      throw IoError("load_dataset: non-contiguous class ids in mapping.txt");
    ds.class_names.push_back(name);
  }
  ds.train_ids = read_lines(fs::path(dir) / "splits" / "train.txt");
  ds.test_ids = read_lines(fs::path(dir) / "splits" / "test.txt");
  auto name_to_idx = [&](const std::string& n) {
    for (std::size_t i = 0; i < ds.class_names.size(); ++i)
      if (ds.class_names[i] == n) return static_cast<int>(i);
    throw IoError("load_dataset: unknown action name " + n);
  };
  auto load_video = [&](const std::string& id) {
    VideoSample v;
    v.id = id;
    v.features = read_features((fs::path(dir) / (id + ".feat")).string());
    for (const auto& n : read_lines(fs::path(dir) / (id + ".txt")))
      v.frame_labels.push_back(name_to_idx(n));
    if (v.frame_labels.size() != v.features.cols())
      throw IoError("load_dataset: frame count mismatch for " + id);
    v.segments = segments_from_labels(v.frame_labels);
    ds.videos.push_back(std::move(v));
  };
  for (const auto& id : ds.train_ids) load_video(id);
  for (const auto& id : ds.test_ids) load_video(id);
  ds.feature_dim = ds.videos.empty() ? 0 : static_cast<int>(ds.videos[0].features.rows());
  return ds;
}

const VideoSample& Dataset::find(const std::string& id) const {
  for (const auto& v : videos)
    if (v.id == id) return v;
  throw InputError("dataset: unknown video id " + id);
}

GeneratedDataset generate_dataset(const Grammar& g, int num_videos, std::uint64_t seed) {
  if (num_videos < 1) throw InputError("generate_dataset: num_videos >= 1 required");
  GeneratedDataset out;
  int n_tasks = static_cast<int>(g.tasks.size());
  char buf[32];
  for (int i = 0; i < num_videos; ++i) {
    int task = i % n_tasks;
    VideoSample v = sample_video(g, task, seed ^ static_cast<std::uint64_t>(i));
    std::snprintf(buf, sizeof(buf), "_%04d", i);
    v.id = g.tasks[static_cast<std::size_t>(task)].name + buf;
    bool is_test = (i % 5 == 4);
    (is_test ? out.test_ids : out.train_ids).push_back(v.id);
    out.videos.push_back(std::move(v));
  }
  return out;
}

}  // namespace anticipate
