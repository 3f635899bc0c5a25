#include "wearcap/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <string>

namespace wearcap {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::ofstream open_table(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header << '\n';
  return out;
}

}  // namespace

void export_plots(const nlohmann::json& report, const MotionEstimate& estimate,
                  const BodyModel& body, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  auto traj = open_table(dir / "trajectories.csv",
                         "time,root_x,root_y,root_z,head_x,head_y,head_z,"
                         "hand_l_x,hand_l_y,hand_l_z,hand_r_x,hand_r_y,hand_r_z");
  for (std::size_t f = 0; f < estimate.body.size(); ++f) {
    const auto& p = estimate.body.frames[f];
    traj << num(estimate.body.times[f]);
    for (const char* v : {"root", "head", "hand_L", "hand_R"}) {
      const Vec3 x = forward_kinematics(body, p, v);
      traj << ',' << num(x.x()) << ',' << num(x.y()) << ',' << num(x.z());
    }
    traj << '\n';
  }

  auto objects = open_table(dir / "objects.csv", "time,object,x,y,z,yaw");
  for (const auto& [id, poses] : estimate.object_poses) {
    for (std::size_t f = 0; f < poses.size() && f < estimate.body.size(); ++f) {
      const Vec3& t = poses[f].translation;
      objects << num(estimate.body.times[f]) << ',' << id << ',' << num(t.x()) << ','
              << num(t.y()) << ',' << num(t.z()) << ',' << num(yaw_of(poses[f].rotation))
              << '\n';
    }
  }

  auto errors = open_table(dir / "errors.csv", "time,e_obj,e_body");
  if (report.is_object() && report.contains("metrics")) {
    const auto& pf = report.at("metrics").at("per_frame");
    const auto& times = pf.at("time");
    for (std::size_t i = 0; i < times.size(); ++i) {
      errors << num(times[i].get<double>()) << ',' << num(pf.at("e_obj")[i].get<double>()) << ','
             << num(pf.at("e_body")[i].get<double>()) << '\n';
    }
  }
}

}  // namespace wearcap
