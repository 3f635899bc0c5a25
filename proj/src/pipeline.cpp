#include "wearcap/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace wearcap {

namespace {

using nlohmann::json;

// Runs one stage, converting any failure into a StageError named after it.
template <typename Fn>
void stage(const char* name, PipelineResult& result, bool timed, Fn fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  if (timed) {
    result.timing[name] +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
}

void warn(PipelineResult& result, std::string message) {
  spdlog::warn("{}", message);
  result.warnings.push_back(std::move(message));
}

// Keeps the anchor's position and heading; the rest follows the motion model.
RigidTransform3 planarize(const ObjectModel& object, const RigidTransform3& anchor, double z) {
  if (object.motion == MotionModel::hinged) return hinge_pose(object, yaw_of(anchor.rotation));
  const double scan_yaw = yaw_of(object.scan_pose.rotation);
  RigidTransform3 out;
  out.rotation = rot_z(yaw_of(anchor.rotation) - scan_yaw) * object.scan_pose.rotation;
  out.translation = Vec3(anchor.translation.x(), anchor.translation.y(), z);
  return out;
}

// Adds piecewise-linear (in time) corrections so that traj passes exactly
// through the targets at the given samples (sorted, distinct).
void pin_samples(Trajectory2& traj, const std::vector<std::size_t>& samples,
                 const std::vector<Vec2>& targets) {
  std::vector<Vec2> res(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) res[i] = targets[i] - traj.xy[samples[i]];
  for (std::size_t k = 0; k < traj.size(); ++k) {
    Vec2 r = res.front();
    if (k >= samples.back()) {
      r = res.back();
    } else if (k > samples.front()) {
      std::size_t i = 0;
      while (samples[i + 1] < k) ++i;
      const double t0 = traj.times[samples[i]];
      const double t1 = traj.times[samples[i + 1]];
      const double u = (traj.times[k] - t0) / (t1 - t0);
      r = (1.0 - u) * res[i] + u * res[i + 1];
    }
    traj.xy[k] += r;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) traj.xy[samples[i]] = targets[i];
}

// Bends the root translation over [first - w, last + w] so that the interval
// is shifted by `offset` while the slice ends stay in place.
void apply_root_offset(BodySequence& params, std::size_t first, std::size_t last,
                       const Vec2& offset, std::size_t w, const BendOptions& options) {
  if (offset.norm() == 0.0) return;
  const std::size_t n = params.size();
  const std::size_t a = first > w ? first - w : 0;
  const std::size_t b = std::min(n - 1, last + w);
  Trajectory2 traj;
  for (std::size_t f = a; f <= b; ++f) {
    traj.times.push_back(params.times[f]);
    traj.xy.push_back(params.frames[f].gamma.head<2>());
    traj.z.push_back(params.frames[f].gamma.z());
  }
  std::vector<std::size_t> samples;
  std::vector<Vec2> targets;
  if (a < first) {
    samples.push_back(0);
    targets.push_back(traj.xy.front());
  }
  samples.push_back(first - a);
  targets.push_back(traj.xy[first - a] + offset);
  samples.push_back(last - a);
  targets.push_back(traj.xy[last - a] + offset);
  if (b > last) {
    samples.push_back(b - a);
    targets.push_back(traj.xy.back());
  }
  std::vector<ControlPoint2> controls;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    controls.push_back({traj.times[samples[i]], targets[i]});
  }
  Trajectory2 bent = bend_trajectory(traj, controls, options).trajectory;
  pin_samples(bent, samples, targets);
  for (std::size_t f = a; f <= b; ++f) {
    params.frames[f].gamma.x() = bent.xy[f - a].x();
    params.frames[f].gamma.y() = bent.xy[f - a].y();
  }
}

std::vector<RigidTransform3> interpolate_poses(const RigidTransform3& o_s,
                                               const RigidTransform3& o_e,
                                               std::span<const double> times) {
  const double ys = yaw_of(o_s.rotation);
  const double delta = wrap_angle(yaw_of(o_e.rotation) - ys);
  const double t0 = times.front();
  const double span = times.back() - t0;
  std::vector<RigidTransform3> out;
  out.reserve(times.size());
  for (double t : times) {
    const double u = (t - t0) / span;
    RigidTransform3 p;
    p.rotation = rot_z(u * delta) * o_s.rotation;
    p.translation = (1.0 - u) * o_s.translation + u * o_e.translation;
    out.push_back(p);
  }
  return out;
}

HandSet effective_hands(const ObjectModel& object, HandSet hands) {
  if (object.motion != MotionModel::hinged) return hands;
  return lead_hand(hands) == "hand_R" ? HandSet::right : HandSet::left;
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::static_object: return "static";
    case Mode::interpolate: return "interpolate";
    case Mode::full: return "full";
  }
  return "full";
}

Mode parse_mode(std::string_view text) {
  if (text == "static") return Mode::static_object;
  if (text == "interpolate") return Mode::interpolate;
  if (text == "full") return Mode::full;
  throw std::invalid_argument("mode must be static, interpolate or full");
}

PipelineResult run_pipeline(const Sequence& seq, const PipelineConfig& config, Mode mode,
                            const GroundTruth* truth) {
  PipelineResult result;
  const bool timed = config.report_timing;
  const BodyModel& body = seq.body;

  stage("calibrate", result, timed, [&] {
    CalibrationOptions options = config.calibration;
    options.ransac.seed = config.seed;
    result.calibration = calibrate(seq.streams.imu_head, seq.streams.localizations, options);
  });

  BodySequence params;
  stage("register", result, timed, [&] {
    const Registration reg = register_human(body, seq.streams.imu_body, seq.streams.localizations,
                                            result.calibration, config.registration);
    result.drift_controls = reg.controls_used;
    if (reg.controls_used == 0) warn(result, "no reliable localizations: drift left uncorrected");
    params = reg.params;
  });
  const std::size_t n = params.size();

  // Anchors per object, reduced to the object's motion model.
  std::map<std::string, std::vector<std::optional<RigidTransform3>>> anchors;
  std::map<std::string, std::vector<InteractionLabel>> labels_of;
  for (const auto& l : seq.interactions) labels_of[l.object_id].push_back(l);
  stage("anchors", result, timed, [&] {
    for (const auto& obj : seq.objects) {
      std::vector<ObjectObservation> obs;
      for (const auto& o : seq.streams.observations) {
        if (o.object_id == obj.id) obs.push_back(o);
      }
      const auto& labels = labels_of[obj.id];
      if (obs.empty()) {
        warn(result, "object '" + obj.id + "' has no observations: contact-only tracking");
      }
      const auto found = anchor_localize(obs, labels, config.dbscan_eps, config.dbscan_min_pts);
      result.anchors[obj.id] = found;
      double z = obj.scan_pose.translation.z();
      std::size_t valid = 0;
      double z_sum = 0.0;
      for (const auto& a : found) {
        if (!a.valid) continue;
        z_sum += a.pose.translation.z();
        ++valid;
      }
      if (valid > 0) z = z_sum / static_cast<double>(valid);
      auto& out = anchors[obj.id];
      for (std::size_t g = 0; g < found.size(); ++g) {
        if (found[g].valid) {
          out.emplace_back(planarize(obj, found[g].pose, z));
        } else {
          out.emplace_back(std::nullopt);
          if (!obs.empty()) {
            warn(result, "object '" + obj.id + "': anchor " + std::to_string(g) + " missing");
          }
        }
      }
    }
  });

  std::map<std::string, std::vector<RigidTransform3>> tracks;
  std::map<std::string, std::vector<bool>> filled;
  std::map<std::string, RigidTransform3> carry;
  std::map<std::string, std::size_t> next_label;
  for (const auto& obj : seq.objects) {
    tracks[obj.id].assign(n, obj.scan_pose);
    filled[obj.id].assign(n, false);
    RigidTransform3 first = obj.scan_pose;
    for (const auto& a : anchors[obj.id]) {
      if (a) {
        first = *a;
        break;
      }
    }
    carry[obj.id] = mode == Mode::static_object ? first : obj.scan_pose;
    if (mode == Mode::static_object) tracks[obj.id].assign(n, first);
  }

  if (mode != Mode::static_object) {
    stage("interactions", result, timed, [&] {
      for (const auto& label : seq.interactions) {
        const auto it = std::find_if(seq.objects.begin(), seq.objects.end(),
                                     [&](const auto& o) { return o.id == label.object_id; });
        const ObjectModel& obj = *it;
        const std::size_t q = next_label[obj.id]++;
        const auto& obj_anchors = anchors[obj.id];
        const RigidTransform3 o_s = obj_anchors[q] ? *obj_anchors[q] : carry[obj.id];
        const std::optional<RigidTransform3> o_e = obj_anchors[q + 1];
        const auto [first, last] = interval_frames(params.times, label);

        InteractionReport rep;
        rep.object_id = obj.id;
        rep.start = label.start;
        rep.end = label.end;
        std::vector<RigidTransform3> poses;
        if (mode == Mode::interpolate) {
          poses = interpolate_poses(
              o_s, o_e.value_or(o_s),
              std::span<const double>(params.times).subspan(first, last - first + 1));
          rep.end_anchor_used = o_e.has_value();
        } else {
          const HandSet hands = effective_hands(obj, label.hands);
          if (config.contact_offset) {
            const ContactResult cr = contact_offset(body, params.frames[first], o_s, obj, hands);
            rep.contact_offset = Vec3(cr.offset.x(), cr.offset.y(), 0.0);
            const auto w = static_cast<std::size_t>(
                std::lround(config.contact_window * seq.frame_rate));
            apply_root_offset(params, first, last, cr.offset.head<2>(), w, config.contact_bend);
          }
          RefineOptions ropt = config.refine;
          for (const auto& name : config.joint_mask) ropt.joint_mask.push_back(body.joint_index(name));
          if (!o_e) {
            warn(result, "interaction of '" + obj.id + "' at t=" + std::to_string(label.start) +
                             " has no end anchor: contact-only tracking");
          }
          const InteractionSolution sol =
              refine_interaction(params, obj, o_s, o_e, label, body, ropt);
          params = sol.body;
          poses = sol.object_poses;
          rep.end_anchor_used = sol.end_anchor_used;
          rep.start_residual = sol.start_residual;
          rep.end_residual = sol.end_residual;
        }
        for (std::size_t f = first; f <= last; ++f) {
          tracks[obj.id][f] = poses[f - first];
          filled[obj.id][f] = true;
        }
        carry[obj.id] = poses.back();
        result.interactions.push_back(rep);
      }
    });

    // Between interactions the object rests at its anchor, or where it was left.
    for (const auto& obj : seq.objects) {
      const auto& labels = labels_of[obj.id];
      const auto& obj_anchors = anchors[obj.id];
      RigidTransform3 last_pose = obj.scan_pose;
      for (std::size_t f = 0; f < n; ++f) {
        if (filled[obj.id][f]) {
          last_pose = tracks[obj.id][f];
          continue;
        }
        std::size_t g = 0;
        while (g < labels.size() && params.times[f] > labels[g].start) ++g;
        tracks[obj.id][f] = obj_anchors[g] ? *obj_anchors[g] : last_pose;
      }
    }
  }

  result.estimate.body = params;
  result.estimate.object_poses = tracks;
  if (truth != nullptr) {
    stage("eval", result, timed, [&] {
      result.metrics = eval_errors(result.estimate, *truth, body, seq.objects);
    });
  }
  return result;
}

json make_report(const PipelineResult& result, const PipelineConfig& config, Mode mode,
                 const GroundTruth* truth) {
  json objects = json::array();
  for (const auto& [id, anchors] : result.anchors) {
    json list = json::array();
    for (const auto& a : anchors) {
      json entry = {{"valid", a.valid}, {"support", a.support}};
      if (a.valid) {
        entry["pose"] = to_json(a.pose);
        entry["span"] = {a.span_start, a.span_end};
      }
      list.push_back(std::move(entry));
    }
    objects.push_back({{"id", id}, {"anchors", std::move(list)}});
  }
  json interactions = json::array();
  for (const auto& r : result.interactions) {
    interactions.push_back({{"object", r.object_id},
                            {"start", r.start},
                            {"end", r.end},
                            {"contact_offset", to_json(r.contact_offset)},
                            {"end_anchor_used", r.end_anchor_used},
                            {"start_residual", r.start_residual},
                            {"end_residual", r.end_residual}});
  }
  json report = {{"schema", "wearcap.report"},
                 {"version", 1},
                 {"mode", to_string(mode)},
                 {"seed", config.seed},
                 {"config", to_json(config)},
                 {"calibration", to_json(result.calibration)},
                 {"stages",
                  {{"registration",
                    {{"frames", result.estimate.body.size()},
                     {"drift_controls", result.drift_controls}}},
                   {"objects", std::move(objects)},
                   {"interactions", std::move(interactions)}}},
                 {"warnings", result.warnings}};
  if (result.metrics && truth != nullptr) {
    report["metrics"] = {{"e_obj", result.metrics->e_obj},
                         {"e_body", result.metrics->e_body},
                         {"per_frame",
                          {{"time", truth->body.times},
                           {"e_obj", result.metrics->obj_per_frame},
                           {"e_body", result.metrics->body_per_frame}}}};
  }
  if (config.report_timing) report["timing"] = result.timing;
  return report;
}

}  // namespace wearcap
