#include "wearcap/config.hpp"

#include "wearcap/sequence_io.hpp"

#include <initializer_list>
#include <stdexcept>

namespace wearcap {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string(section) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument("unknown config key '" + std::string(section) + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

void read_bend(const json& j, const char* section, BendOptions& b) {
  check_keys(j, section,
             {"rigidness", "iterations", "step_size", "eps_angle", "energy", "optimizer", "smoothing"});
  read(j, "rigidness", b.rigidness);
  read(j, "iterations", b.iterations);
  read(j, "step_size", b.step_size);
  read(j, "eps_angle", b.eps_angle);
  read(j, "smoothing", b.smoothing);
  if (j.contains("energy")) {
    const auto e = j.at("energy").get<std::string>();
    if (e == "squared") b.energy = EnergyMode::squared;
    else if (e == "absolute") b.energy = EnergyMode::absolute;
    else throw std::invalid_argument("energy must be 'squared' or 'absolute'");
  }
  if (j.contains("optimizer")) {
    const auto o = j.at("optimizer").get<std::string>();
    if (o == "gauss_newton") b.optimizer = OptimizerKind::gauss_newton;
    else if (o == "sobolev") b.optimizer = OptimizerKind::sobolev;
    else if (o == "adam") b.optimizer = OptimizerKind::adam;
    else throw std::invalid_argument("optimizer must be 'gauss_newton', 'sobolev' or 'adam'");
  }
  if (b.rigidness < 0.0) throw std::invalid_argument(std::string(section) + ".rigidness must be >= 0");
  if (b.iterations < 1) throw std::invalid_argument(std::string(section) + ".iterations must be >= 1");
  if (!(b.step_size > 0.0)) throw std::invalid_argument(std::string(section) + ".step_size must be > 0");
}

const char* optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gauss_newton: return "gauss_newton";
    case OptimizerKind::sobolev: return "sobolev";
    case OptimizerKind::adam: return "adam";
  }
  return "gauss_newton";
}

json bend_json(const BendOptions& b) {
  return {{"rigidness", b.rigidness},
          {"iterations", b.iterations},
          {"step_size", b.step_size},
          {"eps_angle", b.eps_angle},
          {"energy", b.energy == EnergyMode::squared ? "squared" : "absolute"},
          {"optimizer", optimizer_name(b.optimizer)},
          {"smoothing", b.smoothing}};
}

RigidTransform3 transform_value(const json& j) {
  if (j.contains("R")) return transform_from_json(j);
  check_keys(j, "transform", {"yaw", "p"});
  const auto p = j.value("p", std::vector<double>{0.0, 0.0, 0.0});
  if (p.size() != 3) throw std::invalid_argument("transform p must have 3 values");
  return RigidTransform3::from_yaw(j.value("yaw", 0.0), Vec3(p[0], p[1], p[2]));
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.registration.drift.rigidness = 0.01;
  c.registration.drift.iterations = 300;
  c.registration.drift.step_size = 0.05;
  c.registration.drift.smoothing = 15.0;
  c.registration.adapt_eps = 1e-6;
  c.contact_bend.rigidness = 0.01;
  c.contact_bend.iterations = 200;
  c.refine.hand.rigidness = 0.01;
  c.refine.hand.iterations = 200;
  c.refine.pose.rigidness = 0.1;
  c.refine.pose.iterations = 200;
  c.refine.window = 30;
  return c;
}

void apply_config(PipelineConfig& c, const json& j) {
  check_keys(j, "config",
             {"seed", "calibration", "drift", "objects", "contact", "refine", "report_timing"});
  read(j, "seed", c.seed);
  read(j, "report_timing", c.report_timing);
  if (j.contains("calibration")) {
    const json& s = j.at("calibration");
    check_keys(s, "calibration",
               {"ransac_threshold", "ransac_iterations", "max_time_gap", "offsets", "offset_min",
                "offset_max", "offset_step", "local_k", "rounds", "confidence_threshold", "time_offset_override"});
    read(s, "ransac_threshold", c.calibration.ransac.threshold);
    read(s, "ransac_iterations", c.calibration.ransac.iterations);
    read(s, "max_time_gap", c.calibration.ransac.max_time_gap);
    read(s, "local_k", c.calibration.local_k);
    read(s, "rounds", c.calibration.rounds);
    read(s, "confidence_threshold", c.calibration.confidence_threshold);
    if (s.contains("offset_min") || s.contains("offset_max") || s.contains("offset_step")) {
      c.calibration.offsets = offset_grid(s.value("offset_min", -1.0), s.value("offset_max", 1.0),
                                          s.value("offset_step", 0.1));
    }
    read(s, "offsets", c.calibration.offsets);
    if (s.contains("time_offset_override") && !s.at("time_offset_override").is_null()) {
      c.calibration.time_offset_override = s.at("time_offset_override").get<double>();
    }
  }
  if (j.contains("drift")) {
    json s = j.at("drift");
    read(s, "confidence_threshold", c.registration.confidence_threshold);
    read(s, "adapt_eps", c.registration.adapt_eps);
    s.erase("confidence_threshold");
    s.erase("adapt_eps");
    read_bend(s, "drift", c.registration.drift);
  }
  if (j.contains("objects")) {
    const json& s = j.at("objects");
    check_keys(s, "objects", {"dbscan_eps", "dbscan_min_pts"});
    read(s, "dbscan_eps", c.dbscan_eps);
    read(s, "dbscan_min_pts", c.dbscan_min_pts);
  }
  if (j.contains("contact")) {
    json s = j.at("contact");
    read(s, "enabled", c.contact_offset);
    read(s, "window", c.contact_window);
    s.erase("enabled");
    s.erase("window");
    read_bend(s, "contact", c.contact_bend);
  }
  if (j.contains("refine")) {
    const json& s = j.at("refine");
    check_keys(s, "refine", {"window_frames", "refit_body", "joint_mask", "hand", "pose"});
    if (s.contains("window_frames")) c.refine.window = s.at("window_frames").get<std::size_t>();
    read(s, "refit_body", c.refine.refit_body);
    read(s, "joint_mask", c.joint_mask);
    if (s.contains("hand")) read_bend(s.at("hand"), "refine.hand", c.refine.hand);
    if (s.contains("pose")) {
      const json& p = s.at("pose");
      check_keys(p, "refine.pose",
                 {"rigidness", "iterations", "rotation_step", "translation_step", "eps_angle",
                  "optimizer"});
      read(p, "rigidness", c.refine.pose.rigidness);
      read(p, "iterations", c.refine.pose.iterations);
      read(p, "rotation_step", c.refine.pose.rotation_step);
      read(p, "translation_step", c.refine.pose.translation_step);
      read(p, "eps_angle", c.refine.pose.eps_angle);
      if (p.contains("optimizer")) {
        const auto o = p.at("optimizer").get<std::string>();
        if (o == "gauss_newton") c.refine.pose.optimizer = OptimizerKind::gauss_newton;
        else if (o == "adam") c.refine.pose.optimizer = OptimizerKind::adam;
        else throw std::invalid_argument("refine.pose.optimizer must be 'gauss_newton' or 'adam'");
      }
    }
  }
}

json to_json(const PipelineConfig& c) {
  json calib = {{"ransac_threshold", c.calibration.ransac.threshold},
                {"ransac_iterations", c.calibration.ransac.iterations},
                {"max_time_gap", c.calibration.ransac.max_time_gap},
                {"offsets", c.calibration.offsets},
                {"local_k", c.calibration.local_k},
                {"rounds", c.calibration.rounds},
                {"confidence_threshold", c.calibration.confidence_threshold},
                {"time_offset_override", nullptr}};
  if (c.calibration.time_offset_override) {
    calib["time_offset_override"] = *c.calibration.time_offset_override;
  }
  json drift = bend_json(c.registration.drift);
  drift["confidence_threshold"] = c.registration.confidence_threshold;
  drift["adapt_eps"] = c.registration.adapt_eps;
  json contact = bend_json(c.contact_bend);
  contact["enabled"] = c.contact_offset;
  contact["window"] = c.contact_window;
  return {{"seed", c.seed},
          {"calibration", std::move(calib)},
          {"drift", std::move(drift)},
          {"objects", {{"dbscan_eps", c.dbscan_eps}, {"dbscan_min_pts", c.dbscan_min_pts}}},
          {"contact", std::move(contact)},
          {"refine",
           {{"window_frames", c.refine.window},
            {"refit_body", c.refine.refit_body},
            {"joint_mask", c.joint_mask},
            {"hand", bend_json(c.refine.hand)},
            {"pose",
             {{"rigidness", c.refine.pose.rigidness},
              {"iterations", c.refine.pose.iterations},
              {"rotation_step", c.refine.pose.rotation_step},
              {"translation_step", c.refine.pose.translation_step},
              {"eps_angle", c.refine.pose.eps_angle},
              {"optimizer", optimizer_name(c.refine.pose.optimizer)}}}}},
          {"report_timing", c.report_timing}};
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  PipelineConfig c = PipelineConfig::defaults();
  const json j = json::parse(read_text_file(path));
  apply_config(c, j);
  return c;
}

ScenarioConfig scenario_from_json(const json& j, std::uint64_t seed) {
  check_keys(j, "scenario",
             {"preset", "frame_rate", "drift_rate", "drift_rot_rate", "loc_noise_sigma",
              "loc_rot_noise_sigma", "loc_period", "confidence_inside", "confidence_outside",
              "outlier_fraction", "outlier_sigma", "outlier_confidence", "obs_noise_sigma",
              "obs_rot_noise_sigma", "obs_period", "obs_outlier_fraction", "visibility_range",
              "observe_objects", "true_x_wz", "true_x_ic", "time_offset", "walk_speed", "pause",
              "walk_length", "noiseless", "interactions"});
  ScenarioConfig c = ScenarioConfig::preset(j.value("preset", std::string("mixed")), seed);
  if (j.value("noiseless", false)) c.make_noiseless();
  read(j, "frame_rate", c.frame_rate);
  read(j, "drift_rate", c.drift_rate);
  read(j, "drift_rot_rate", c.drift_rot_rate);
  read(j, "loc_noise_sigma", c.loc_noise_sigma);
  read(j, "loc_rot_noise_sigma", c.loc_rot_noise_sigma);
  read(j, "loc_period", c.loc_period);
  read(j, "confidence_inside", c.confidence_inside);
  read(j, "confidence_outside", c.confidence_outside);
  read(j, "outlier_fraction", c.outlier_fraction);
  read(j, "outlier_sigma", c.outlier_sigma);
  read(j, "outlier_confidence", c.outlier_confidence);
  read(j, "obs_noise_sigma", c.obs_noise_sigma);
  read(j, "obs_rot_noise_sigma", c.obs_rot_noise_sigma);
  read(j, "obs_period", c.obs_period);
  read(j, "obs_outlier_fraction", c.obs_outlier_fraction);
  read(j, "visibility_range", c.visibility_range);
  read(j, "observe_objects", c.observe_objects);
  read(j, "time_offset", c.time_offset);
  read(j, "walk_speed", c.walk_speed);
  read(j, "pause", c.pause);
  read(j, "walk_length", c.walk_length);
  if (j.contains("true_x_wz")) c.true_x_wz = transform_value(j.at("true_x_wz"));
  if (j.contains("true_x_ic")) c.true_x_ic = transform_value(j.at("true_x_ic"));
  if (j.contains("interactions")) {
    c.interactions.clear();
    for (const auto& s : j.at("interactions")) {
      check_keys(s, "interactions[]",
                 {"kind", "hands", "duration", "swing", "drag_distance", "drag_turn"});
      InteractionScript script;
      script.kind = parse_object_kind(s.value("kind", std::string("door")));
      script.hands = parse_hand_set(s.value("hands", std::string(
                                                         script.kind == ObjectKind::door ? "R" : "LR")));
      if (script.kind == ObjectKind::table) script.duration = 5.0;
      read(s, "duration", script.duration);
      read(s, "swing", script.swing);
      read(s, "drag_distance", script.drag_distance);
      read(s, "drag_turn", script.drag_turn);
      c.interactions.push_back(script);
    }
  }
  c.validate();
  return c;
}

json to_json(const ScenarioConfig& c) {
  json interactions = json::array();
  for (const auto& s : c.interactions) {
    interactions.push_back({{"kind", to_string(s.kind)},
                            {"hands", to_string(s.hands)},
                            {"duration", s.duration},
                            {"swing", s.swing},
                            {"drag_distance", s.drag_distance},
                            {"drag_turn", s.drag_turn}});
  }
  return {{"seed", c.seed},
          {"frame_rate", c.frame_rate},
          {"drift_rate", c.drift_rate},
          {"drift_rot_rate", c.drift_rot_rate},
          {"loc_noise_sigma", c.loc_noise_sigma},
          {"loc_rot_noise_sigma", c.loc_rot_noise_sigma},
          {"loc_period", c.loc_period},
          {"confidence_inside", c.confidence_inside},
          {"confidence_outside", c.confidence_outside},
          {"outlier_fraction", c.outlier_fraction},
          {"outlier_sigma", c.outlier_sigma},
          {"outlier_confidence", c.outlier_confidence},
          {"obs_noise_sigma", c.obs_noise_sigma},
          {"obs_rot_noise_sigma", c.obs_rot_noise_sigma},
          {"obs_period", c.obs_period},
          {"obs_outlier_fraction", c.obs_outlier_fraction},
          {"visibility_range", c.visibility_range},
          {"observe_objects", c.observe_objects},
          {"true_x_wz", to_json(c.true_x_wz)},
          {"true_x_ic", to_json(c.true_x_ic)},
          {"time_offset", c.time_offset},
          {"walk_speed", c.walk_speed},
          {"pause", c.pause},
          {"walk_length", c.walk_length},
          {"interactions", std::move(interactions)}};
}

}  // namespace wearcap
