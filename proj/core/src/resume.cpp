// Resume files: everything needed to continue a run bit-exactly.

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "comm_arena/error.hpp"
#include "comm_arena/training.hpp"

namespace comm_arena::training {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json values = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw InvalidInput("resume: matrix size mismatch");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[r * cols + c];
  }
  return m;
}

json moments_to_json(const std::vector<diffnet::LayerGradient>& layers) {
  json out = json::array();
  for (const auto& l : layers) {
    out.push_back({{"weights", matrix_to_json(l.weights)},
                   {"bias", matrix_to_json(l.bias)}});
  }
  return out;
}

std::vector<diffnet::LayerGradient> moments_from_json(const json& j) {
  std::vector<diffnet::LayerGradient> layers;
  for (const auto& l : j) {
    layers.push_back({matrix_from_json(l.at("weights")),
                      matrix_from_json(l.at("bias")).col(0)});
  }
  return layers;
}

json learner_to_json(const Learner& learner) {
  const auto& opt = learner.optimizer;
  const auto& h = opt.hyperparameters();
  return {
      {"online", json::parse(diffnet::to_checkpoint_json(learner.online))},
      {"target", json::parse(diffnet::to_checkpoint_json(learner.target))},
      {"adam",
       {{"lr", h.lr},
        {"beta1", h.beta1},
        {"beta2", h.beta2},
        {"eps", h.eps},
        {"step_count", opt.step_count()},
        {"first", moments_to_json(opt.first_moment())},
        {"second", moments_to_json(opt.second_moment())}}},
  };
}

Learner learner_from_json(const json& j) {
  Learner learner;
  learner.online = diffnet::from_checkpoint_json(j.at("online").dump());
  learner.target = diffnet::from_checkpoint_json(j.at("target").dump());
  const auto& a = j.at("adam");
  diffnet::AdamHyperparameters h{a.at("lr").get<double>(), a.at("beta1").get<double>(),
                                 a.at("beta2").get<double>(), a.at("eps").get<double>()};
  learner.optimizer = AdamState::restore(h, a.at("step_count").get<std::size_t>(),
                                         moments_from_json(a.at("first")),
                                         moments_from_json(a.at("second")));
  return learner;
}

json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

void save_resume(const TrainerState& trainer, const std::filesystem::path& path) {
  const auto& c = trainer.config;
  const auto& e = trainer.env;
  json root;
  root["format"] = "comm-arena-resume-1";
  root["config"] = {{"gamma", c.gamma},
                    {"lr", c.lr},
                    {"epochs", c.epochs},
                    {"batch_size", c.batch_size},
                    {"episodes_per_epoch", c.episodes_per_epoch},
                    {"mode", std::string(env::to_string(c.mode))},
                    {"seed", c.seed},
                    {"epsilon_start", c.epsilon_start},
                    {"epsilon_end", c.epsilon_end},
                    {"epsilon_anneal_fraction", c.epsilon_anneal_fraction},
                    {"adam_beta1", c.adam_beta1},
                    {"adam_beta2", c.adam_beta2},
                    {"adam_eps", c.adam_eps}};
  root["env"] = {{"arena_half_width", e.arena_half_width},
                 {"dt", e.dt},
                 {"velocity_damping", e.velocity_damping},
                 {"predator_accel", e.predator_accel},
                 {"prey_accel", e.prey_accel},
                 {"predator_max_speed", e.predator_max_speed},
                 {"prey_max_speed", e.prey_max_speed},
                 {"episode_length", e.episode_length}};
  root["epoch"] = trainer.epoch;
  root["rng"] = trainer.rng.serialize();
  json log = json::array();
  for (const auto& r : trainer.log) {
    log.push_back({r.epoch, r.mean_predator_reward, r.mean_prey_reward, r.epsilon,
                   optional_to_json(r.dial_loss), optional_to_json(r.iql_loss_prey),
                   optional_to_json(r.iql_loss_pred)});
  }
  root["log"] = std::move(log);
  json learners = json::object();
  if (trainer.cnet) learners["cnet"] = learner_to_json(*trainer.cnet);
  if (trainer.anet) learners["anet"] = learner_to_json(*trainer.anet);
  if (trainer.predator_iql) learners["predator_iql"] = learner_to_json(*trainer.predator_iql);
  learners["prey"] = learner_to_json(trainer.prey);
  root["learners"] = std::move(learners);

  // Write-then-rename so an interrupted save never clobbers the last good file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << root.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

TrainerState load_resume(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read resume file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    const json root = json::parse(buffer.str());
    if (root.value("format", "") != "comm-arena-resume-1") {
      throw InvalidInput("resume: unrecognized format in " + path.string());
    }
    TrainerState t;
    const auto& c = root.at("config");
    t.config.gamma = c.at("gamma");
    t.config.lr = c.at("lr");
    t.config.epochs = c.at("epochs");
    t.config.batch_size = c.at("batch_size");
    t.config.episodes_per_epoch = c.at("episodes_per_epoch");
    t.config.mode = env::mode_from_string(c.at("mode").get<std::string>());
    t.config.seed = c.at("seed");
    t.config.epsilon_start = c.at("epsilon_start");
    t.config.epsilon_end = c.at("epsilon_end");
    t.config.epsilon_anneal_fraction = c.at("epsilon_anneal_fraction");
    t.config.adam_beta1 = c.at("adam_beta1");
    t.config.adam_beta2 = c.at("adam_beta2");
    t.config.adam_eps = c.at("adam_eps");
    const auto& e = root.at("env");
    t.env.arena_half_width = e.at("arena_half_width");
    t.env.dt = e.at("dt");
    t.env.velocity_damping = e.at("velocity_damping");
    t.env.predator_accel = e.at("predator_accel");
    t.env.prey_accel = e.at("prey_accel");
    t.env.predator_max_speed = e.at("predator_max_speed");
    t.env.prey_max_speed = e.at("prey_max_speed");
    t.env.episode_length = e.at("episode_length");
    t.env.mode = t.config.mode;
    t.epoch = root.at("epoch");
    t.rng = SeedStream::deserialize(root.at("rng").get<std::string>());
    for (const auto& r : root.at("log")) {
      t.log.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(),
                       r.at(3).get<double>(), optional_from_json(r.at(4)),
                       optional_from_json(r.at(5)), optional_from_json(r.at(6))});
    }
    const auto& learners = root.at("learners");
    if (learners.contains("cnet")) t.cnet = learner_from_json(learners.at("cnet"));
    if (learners.contains("anet")) t.anet = learner_from_json(learners.at("anet"));
    if (learners.contains("predator_iql")) {
      t.predator_iql = learner_from_json(learners.at("predator_iql"));
    }
    t.prey = learner_from_json(learners.at("prey"));
    return t;
  } catch (const json::exception& ex) {
    throw InvalidInput("resume: " + path.string() + ": " + ex.what());
  }
}

}  // namespace comm_arena::training
