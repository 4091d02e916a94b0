#include "moelab/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "moelab/fsutil.hpp"

namespace moelab {

namespace {

constexpr double kPi = 3.14159265358979323846;

SceneConfig validated(SceneConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

ZipfSampler::ZipfSampler(double exponent, std::size_t n) {
  if (n < 1) throw std::invalid_argument("zipf: need at least one class");
  if (!(exponent >= 0.0)) throw std::invalid_argument("zipf: exponent must be >= 0");
  masses_.resize(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    masses_[r] = std::pow(static_cast<double>(r + 1), -exponent);
    total += masses_[r];
  }
  cdf_.resize(n);
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    masses_[r] /= total;
    acc += masses_[r];
    cdf_[r] = acc;
  }
  cdf_.back() = 1.0;
}

std::size_t ZipfSampler::sample(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::size_t>(it - cdf_.begin());
}

std::vector<FrequencyGroup> frequency_groups(const std::vector<std::size_t>& counts,
                                             double cut_many, double cut_few) {
  if (!(cut_many > cut_few) || cut_few < 0.0)
    throw std::invalid_argument("frequency_groups: need cut_many > cut_few >= 0");
  std::vector<FrequencyGroup> groups(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto c = static_cast<double>(counts[i]);
    if (c >= cut_many) groups[i] = FrequencyGroup::kMany;
    else if (c <= cut_few) groups[i] = FrequencyGroup::kFew;
    else groups[i] = FrequencyGroup::kMedium;
  }
  return groups;
}

std::pair<double, double> default_group_cuts(const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw std::invalid_argument("default_group_cuts: empty counts");
  std::vector<std::size_t> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t idx_few = (n - 1) / 3;
  const std::size_t idx_many = (2 * (n - 1) + 2) / 3;
  double cut_few = static_cast<double>(sorted[idx_few]);
  double cut_many = static_cast<double>(sorted[idx_many]);
  if (!(cut_many > cut_few)) cut_many = cut_few + 1.0;  // degenerate flat corpora
  return {cut_many, cut_few};
}

void SceneConfig::validate() const {
  if (vocab.size() < 2) throw std::invalid_argument("scene config: vocabulary too small");
  if (!(zipf_exponent > 0.0))
    throw std::invalid_argument("scene config: zipf exponent must be > 0");
  if (objects_min < 1 || objects_max < objects_min)
    throw std::invalid_argument("scene config: bad objects range");
  if (modes_per_class < 1)
    throw std::invalid_argument("scene config: modes_per_class must be >= 1");
  if (obs_dim < 4) throw std::invalid_argument("scene config: obs_dim must be >= 4");
  if (obs_noise < 0.0) throw std::invalid_argument("scene config: obs_noise must be >= 0");
  if (!(obs_group_share >= 0.0 && obs_group_share < 1.0))
    throw std::invalid_argument("scene config: obs_group_share must lie in [0,1)");
  if (lang_dim < 8) throw std::invalid_argument("scene config: lang_dim must be >= 8");
  if (!(world_extent > inner_radius && inner_radius >= 0.0))
    throw std::invalid_argument("scene config: world extent must exceed inner radius");
  if (min_separation < 0.0)
    throw std::invalid_argument("scene config: min_separation must be >= 0");
  if (rig.cameras < 1) throw std::invalid_argument("scene config: need at least one camera");
  if (!(rig.focal > 0.0 && rig.width > 0.0 && rig.height > 0.0))
    throw std::invalid_argument("scene config: bad camera intrinsics");
  for (const auto& cp : confusion) {
    if (cp.class_a < 0 || static_cast<std::size_t>(cp.class_a) >= vocab.size() ||
        cp.class_b < 0 || static_cast<std::size_t>(cp.class_b) >= vocab.size())
      throw std::invalid_argument("scene config: confusion pair class out of range");
    if (!(cp.cosine >= 0.0 && cp.cosine < 1.0))
      throw std::invalid_argument("scene config: confusion cosine must lie in [0,1)");
    if (!(cp.fraction >= 0.0 && cp.fraction <= 1.0))
      throw std::invalid_argument("scene config: confusion fraction must lie in [0,1]");
  }
}

std::vector<ConfusionPair> default_confusion_pairs() {
  // Tail ids pulled toward head ids of a different semantic group, so the
  // induced teacher ambiguity stands out against the intra-group similarity
  // floor.
  return {{16, 0, 0.6, 0.5}, {17, 1, 0.6, 0.5}};
}

SceneGenerator::SceneGenerator(SceneConfig cfg)
    : cfg_(validated(std::move(cfg))),
      language_(cfg_.embeddings_file.empty()
                    ? synth_language_embeddings(cfg_.vocab, cfg_.lang_dim, cfg_.provider_seed,
                                                cfg_.intra_group_cos)
                    : load_embeddings(cfg_.embeddings_file, cfg_.vocab)),
      provider_(language_, mix_seed(cfg_.provider_seed, 0x30de5ULL), cfg_.mode_offset_scale) {
  if (language_.matrix.cols() != cfg_.lang_dim) {
    throw std::invalid_argument("loaded embeddings have dimension " +
                                std::to_string(language_.matrix.cols()) +
                                " but the config says " + std::to_string(cfg_.lang_dim));
  }

  // Fixed observation basis: per (class, mode) a unit-scale direction that
  // blends a shared per-group component with a class-mode-specific one, plus
  // a linear positional encoding and per-class size jitter.
  Rng basis_rng(mix_seed(cfg_.provider_seed, 0xba515ULL));
  const double comp = 1.0 / std::sqrt(static_cast<double>(cfg_.obs_dim));
  std::vector<Tensor> group_basis;
  group_basis.reserve(cfg_.vocab.group_count());
  for (int g = 0; g < cfg_.vocab.group_count(); ++g) {
    group_basis.push_back(basis_rng.gaussian_matrix(1, cfg_.obs_dim, comp));
  }
  const double gshare = std::sqrt(cfg_.obs_group_share);
  const double cshare = std::sqrt(1.0 - cfg_.obs_group_share);
  class_mode_basis_.reserve(cfg_.vocab.size());
  for (std::size_t c = 0; c < cfg_.vocab.size(); ++c) {
    Tensor own = basis_rng.gaussian_matrix(cfg_.modes_per_class, cfg_.obs_dim, comp);
    const Tensor& shared = group_basis[cfg_.vocab.entry(c).semantic_group];
    for (std::size_t m = 0; m < cfg_.modes_per_class; ++m)
      for (std::size_t j = 0; j < cfg_.obs_dim; ++j)
        own(m, j) = gshare * shared(0, j) + cshare * own(m, j);
    class_mode_basis_.push_back(std::move(own));
  }
  pos_encoding_ = basis_rng.gaussian_matrix(cfg_.obs_dim, 3, comp);
  size_jitter_.reserve(cfg_.vocab.size());
  for (std::size_t c = 0; c < cfg_.vocab.size(); ++c) {
    size_jitter_.push_back(basis_rng.uniform(0.9, 1.1));
  }

  rig_.reserve(cfg_.rig.cameras);
  const double cx = cfg_.rig.width / 2.0;
  const double cy = cfg_.rig.height / 2.0;
  for (std::size_t c = 0; c < cfg_.rig.cameras; ++c) {
    const double yaw = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(cfg_.rig.cameras);
    const Vec3 pos{cfg_.rig.ring_radius * std::cos(yaw), cfg_.rig.ring_radius * std::sin(yaw),
                   cfg_.rig.mount_height};
    rig_.push_back(Camera::looking(pos, yaw, cfg_.rig.focal, cfg_.rig.focal, cx, cy,
                                   cfg_.rig.width, cfg_.rig.height));
  }
}

Vec3 SceneGenerator::class_size(int class_id) const {
  const int group = cfg_.vocab.entry(static_cast<std::size_t>(class_id)).semantic_group;
  Vec3 base{1.2, 1.2, 1.0};
  if (group == 0) base = {0.6, 0.6, 1.7};
  else if (group == 1) base = {4.5, 2.0, 1.6};
  const double j = size_jitter_[static_cast<std::size_t>(class_id)];
  return {base[0] * j, base[1] * j, base[2] * j};
}

std::vector<double> SceneGenerator::observation_for(const SceneInstance& inst, Rng& rng) const {
  const std::size_t D = cfg_.obs_dim;
  std::vector<double> row(D);
  const Tensor& basis = class_mode_basis_[static_cast<std::size_t>(inst.box.class_id)];
  const double comp = 1.0 / std::sqrt(static_cast<double>(D));
  const double cn[3] = {inst.box.center[0] / cfg_.world_extent,
                        inst.box.center[1] / cfg_.world_extent,
                        inst.box.center[2] / cfg_.world_extent};
  for (std::size_t jx = 0; jx < D; ++jx) {
    double v = basis(static_cast<std::size_t>(inst.mode_id), jx);
    double pe = 0.0;
    for (std::size_t t = 0; t < 3; ++t) pe += pos_encoding_(jx, t) * cn[t];
    v += cfg_.pos_encoding_scale * pe;
    v += cfg_.obs_noise * comp * rng.gaussian();
    row[jx] = v;
  }
  return row;
}

Scene SceneGenerator::generate(std::uint64_t scene_seed) const {
  Rng rng(mix_seed(cfg_.provider_seed, mix_seed(0x5ce9eULL, scene_seed)));
  Scene scene;
  scene.seed = scene_seed;
  scene.rig = rig_;
  scene.distractors = cfg_.distractors;

  ZipfSampler zipf(cfg_.zipf_exponent, cfg_.vocab.size());
  const std::size_t count =
      cfg_.objects_min + rng.uniform_index(cfg_.objects_max - cfg_.objects_min + 1);

  std::vector<std::pair<double, double>> placed;
  for (std::size_t i = 0; i < count; ++i) {
    const int class_id = static_cast<int>(zipf.sample(rng));
    const int mode_id = static_cast<int>(rng.uniform_index(cfg_.modes_per_class));

    double x = 0.0, y = 0.0;
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      x = rng.uniform(-cfg_.world_extent, cfg_.world_extent);
      y = rng.uniform(-cfg_.world_extent, cfg_.world_extent);
      if (std::hypot(x, y) < cfg_.inner_radius) continue;
      ok = true;
      for (const auto& [px, py] : placed) {
        if (std::hypot(x - px, y - py) < cfg_.min_separation) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      throw std::runtime_error(
          "scene generation: could not place an object after 1000 tries; world too small for "
          "the separation constraint");
    }
    placed.emplace_back(x, y);

    SceneInstance inst;
    inst.box.class_id = class_id;
    inst.mode_id = mode_id;
    inst.box.size = class_size(class_id);
    inst.box.center = {x, y, inst.box.size[2] / 2.0};
    inst.box.yaw = rng.uniform(-kPi, kPi);
    if (inst.box.yaw <= -kPi) inst.box.yaw = kPi;

    const ConfusionPair* pair = nullptr;
    for (const auto& cp : cfg_.confusion) {
      if (cp.class_a == class_id) {
        pair = &cp;
        break;
      }
    }
    VisualEmbedding teacher =
        (pair != nullptr && rng.uniform() < pair->fraction)
            ? provider_.sample_confused(class_id, pair->class_b, pair->cosine, mode_id,
                                        cfg_.teacher_noise, rng)
            : provider_.sample(class_id, mode_id, cfg_.teacher_noise, rng);
    inst.teacher = std::move(teacher.vector);
    scene.instances.push_back(std::move(inst));
  }

  const std::size_t k = count + cfg_.distractors;
  scene.observations = Tensor(k, cfg_.obs_dim);
  for (std::size_t q = 0; q < count; ++q) {
    const std::vector<double> row = observation_for(scene.instances[q], rng);
    for (std::size_t j = 0; j < cfg_.obs_dim; ++j) scene.observations(q, j) = row[j];
  }
  const double comp = 1.0 / std::sqrt(static_cast<double>(cfg_.obs_dim));
  for (std::size_t q = count; q < k; ++q) {
    for (std::size_t j = 0; j < cfg_.obs_dim; ++j)
      scene.observations(q, j) = comp * rng.gaussian();
  }
  return scene;
}

CorpusStats corpus_stats(const SceneGenerator& gen, std::size_t n_scenes,
                         std::uint64_t base_seed) {
  CorpusStats stats;
  stats.class_counts.assign(gen.config().vocab.size(), 0);
  stats.scenes = n_scenes;
  for (std::size_t i = 0; i < n_scenes; ++i) {
    const Scene scene = gen.generate(base_seed + i);
    for (const auto& inst : scene.instances) {
      ++stats.class_counts[static_cast<std::size_t>(inst.box.class_id)];
      ++stats.instances;
    }
  }
  const auto [cut_many, cut_few] = default_group_cuts(stats.class_counts);
  stats.cut_many = cut_many;
  stats.cut_few = cut_few;
  stats.groups = frequency_groups(stats.class_counts, cut_many, cut_few);
  return stats;
}

std::vector<Scene> generate_corpus(const SceneGenerator& gen, std::size_t n_scenes,
                                   std::uint64_t base_seed, CorpusStats* stats) {
  std::vector<Scene> scenes;
  scenes.reserve(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) scenes.push_back(gen.generate(base_seed + i));
  if (stats != nullptr) {
    stats->class_counts.assign(gen.config().vocab.size(), 0);
    stats->scenes = n_scenes;
    stats->instances = 0;
    for (const auto& scene : scenes) {
      for (const auto& inst : scene.instances) {
        ++stats->class_counts[static_cast<std::size_t>(inst.box.class_id)];
        ++stats->instances;
      }
    }
    const auto [cut_many, cut_few] = default_group_cuts(stats->class_counts);
    stats->cut_many = cut_many;
    stats->cut_few = cut_few;
    stats->groups = frequency_groups(stats->class_counts, cut_many, cut_few);
  }
  return scenes;
}

namespace {

void write_config_block(std::ostringstream& out, const SceneConfig& cfg) {
  out << "vocab " << cfg.vocab.size() << " " << cfg.vocab.group_count() << "\n";
  for (const auto& e : cfg.vocab.entries()) {
    if (e.name.find_first_of(" \t\n") != std::string::npos)
      throw std::invalid_argument("class names must not contain whitespace: " + e.name);
    out << e.name << " " << e.semantic_group << "\n";
  }
  out << "zipf_exponent " << format_double(cfg.zipf_exponent) << "\n";
  out << "objects_min " << cfg.objects_min << "\n";
  out << "objects_max " << cfg.objects_max << "\n";
  out << "modes_per_class " << cfg.modes_per_class << "\n";
  out << "obs_dim " << cfg.obs_dim << "\n";
  out << "obs_noise " << format_double(cfg.obs_noise) << "\n";
  out << "obs_group_share " << format_double(cfg.obs_group_share) << "\n";
  out << "distractors " << cfg.distractors << "\n";
  out << "world_extent " << format_double(cfg.world_extent) << "\n";
  out << "inner_radius " << format_double(cfg.inner_radius) << "\n";
  out << "min_separation " << format_double(cfg.min_separation) << "\n";
  out << "provider_seed " << cfg.provider_seed << "\n";
  out << "lang_dim " << cfg.lang_dim << "\n";
  out << "intra_group_cos " << format_double(cfg.intra_group_cos) << "\n";
  out << "teacher_noise " << format_double(cfg.teacher_noise) << "\n";
  out << "mode_offset_scale " << format_double(cfg.mode_offset_scale) << "\n";
  out << "pos_encoding_scale " << format_double(cfg.pos_encoding_scale) << "\n";
  out << "embeddings_file " << (cfg.embeddings_file.empty() ? "-" : cfg.embeddings_file)
      << "\n";
  out << "confusions " << cfg.confusion.size() << "\n";
  for (const auto& cp : cfg.confusion) {
    out << cp.class_a << " " << cp.class_b << " " << format_double(cp.cosine) << " "
        << format_double(cp.fraction) << "\n";
  }
  out << "rig_cameras " << cfg.rig.cameras << "\n";
  out << "rig_focal " << format_double(cfg.rig.focal) << "\n";
  out << "rig_width " << format_double(cfg.rig.width) << "\n";
  out << "rig_height " << format_double(cfg.rig.height) << "\n";
  out << "rig_mount_height " << format_double(cfg.rig.mount_height) << "\n";
  out << "rig_ring_radius " << format_double(cfg.rig.ring_radius) << "\n";
}

void expect_token(std::istream& in, const char* token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw std::runtime_error(std::string("corpus file: expected `") + token + "`, got `" + got +
                             "`");
  }
}

SceneConfig read_config_block(std::istream& in) {
  SceneConfig cfg;
  expect_token(in, "vocab");
  std::size_t n = 0;
  int groups = 0;
  in >> n >> groups;
  std::vector<VocabEntry> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    in >> entries[i].name >> entries[i].semantic_group;
  }
  cfg.vocab = ClassVocabulary(std::move(entries));

  auto read_named = [&in](const char* name, auto& target) {
    expect_token(in, name);
    if (!(in >> target)) throw std::runtime_error("corpus file: truncated config");
  };
  read_named("zipf_exponent", cfg.zipf_exponent);
  read_named("objects_min", cfg.objects_min);
  read_named("objects_max", cfg.objects_max);
  read_named("modes_per_class", cfg.modes_per_class);
  read_named("obs_dim", cfg.obs_dim);
  read_named("obs_noise", cfg.obs_noise);
  read_named("obs_group_share", cfg.obs_group_share);
  read_named("distractors", cfg.distractors);
  read_named("world_extent", cfg.world_extent);
  read_named("inner_radius", cfg.inner_radius);
  read_named("min_separation", cfg.min_separation);
  read_named("provider_seed", cfg.provider_seed);
  read_named("lang_dim", cfg.lang_dim);
  read_named("intra_group_cos", cfg.intra_group_cos);
  read_named("teacher_noise", cfg.teacher_noise);
  read_named("mode_offset_scale", cfg.mode_offset_scale);
  read_named("pos_encoding_scale", cfg.pos_encoding_scale);
  read_named("embeddings_file", cfg.embeddings_file);
  if (cfg.embeddings_file == "-") cfg.embeddings_file.clear();
  std::size_t confusions = 0;
  read_named("confusions", confusions);
  cfg.confusion.resize(confusions);
  for (auto& cp : cfg.confusion) {
    in >> cp.class_a >> cp.class_b >> cp.cosine >> cp.fraction;
  }
  read_named("rig_cameras", cfg.rig.cameras);
  read_named("rig_focal", cfg.rig.focal);
  read_named("rig_width", cfg.rig.width);
  read_named("rig_height", cfg.rig.height);
  read_named("rig_mount_height", cfg.rig.mount_height);
  read_named("rig_ring_radius", cfg.rig.ring_radius);
  if (!in) throw std::runtime_error("corpus file: truncated config block");
  return cfg;
}

}  // namespace

void save_corpus(const std::string& path, const SceneConfig& cfg,
                 const std::vector<Scene>& scenes, std::uint64_t base_seed) {
  std::ostringstream out;
  out << "SCN v1\n";
  write_config_block(out, cfg);
  out << "scenes " << scenes.size() << " base_seed " << base_seed << "\n";
  for (std::size_t idx = 0; idx < scenes.size(); ++idx) {
    const Scene& s = scenes[idx];
    out << "scene " << idx << " seed " << s.seed << " instances " << s.instances.size()
        << " distractors " << s.distractors << "\n";
    for (const auto& inst : s.instances) {
      out << "inst " << inst.box.class_id << " " << inst.mode_id;
      for (double v : inst.box.center) out << " " << format_double(v);
      for (double v : inst.box.size) out << " " << format_double(v);
      out << " " << format_double(inst.box.yaw) << "\n";
      out << "teach";
      for (double v : inst.teacher) out << " " << format_double(v);
      out << "\n";
    }
    out << "obs " << s.observations.rows() << " " << s.observations.cols() << "\n";
    for (std::size_t q = 0; q < s.observations.rows(); ++q) {
      for (std::size_t j = 0; j < s.observations.cols(); ++j) {
        out << (j == 0 ? "" : " ") << format_double(s.observations(q, j));
      }
      out << "\n";
    }
    for (const auto& cam : s.rig) {
      out << "cam";
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) out << " " << format_double(cam.extrinsic(i, j));
      out << " " << format_double(cam.fx) << " " << format_double(cam.fy) << " "
          << format_double(cam.cx) << " " << format_double(cam.cy) << " "
          << format_double(cam.width) << " " << format_double(cam.height) << "\n";
    }
    out << "end_scene\n";
  }
  out << "end\n";
  write_text_file(path, out.str());
}

LoadedCorpus load_corpus(const std::string& path) {
  std::istringstream in(read_text_file(path));
  expect_token(in, "SCN");
  expect_token(in, "v1");
  LoadedCorpus corpus;
  corpus.config = read_config_block(in);

  expect_token(in, "scenes");
  std::size_t n_scenes = 0;
  in >> n_scenes;
  expect_token(in, "base_seed");
  in >> corpus.base_seed;

  corpus.scenes.reserve(n_scenes);
  for (std::size_t si = 0; si < n_scenes; ++si) {
    expect_token(in, "scene");
    std::size_t idx = 0;
    in >> idx;
    Scene scene;
    expect_token(in, "seed");
    in >> scene.seed;
    expect_token(in, "instances");
    std::size_t m = 0;
    in >> m;
    expect_token(in, "distractors");
    in >> scene.distractors;

    scene.instances.resize(m);
    for (auto& inst : scene.instances) {
      expect_token(in, "inst");
      in >> inst.box.class_id >> inst.mode_id;
      for (double& v : inst.box.center) in >> v;
      for (double& v : inst.box.size) in >> v;
      in >> inst.box.yaw;
      expect_token(in, "teach");
      inst.teacher.resize(corpus.config.lang_dim);
      for (double& v : inst.teacher) in >> v;
    }
    expect_token(in, "obs");
    std::size_t k = 0, D = 0;
    in >> k >> D;
    scene.observations = Tensor(k, D);
    for (std::size_t q = 0; q < k; ++q)
      for (std::size_t j = 0; j < D; ++j) in >> scene.observations(q, j);
    scene.rig.resize(corpus.config.rig.cameras);
    for (auto& cam : scene.rig) {
      expect_token(in, "cam");
      cam.extrinsic = Tensor(4, 4);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) in >> cam.extrinsic(i, j);
      in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height;
    }
    expect_token(in, "end_scene");
    if (!in) throw std::runtime_error("corpus file: truncated scene record");
    corpus.scenes.push_back(std::move(scene));
  }
  expect_token(in, "end");
  return corpus;
}

}  // namespace moelab
