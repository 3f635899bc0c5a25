#include "wearcap/sequence_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace wearcap {

namespace {

// A field-level problem inside one record.
struct FieldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const Json& field(const Json& rec, const char* key) {
  if (!rec.is_object() || !rec.contains(key)) {
    throw FieldError(std::string("missing field '") + key + "'");
  }
  return rec.at(key);
}

double number(const Json& rec, const char* key) {
  const Json& v = field(rec, key);
  if (!v.is_number()) throw FieldError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw FieldError(std::string("field '") + key + "' must be finite");
  return d;
}

std::string text(const Json& rec, const char* key) {
  const Json& v = field(rec, key);
  if (!v.is_string()) throw FieldError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const Json& v, const char* key, std::size_t expected) {
  if (!v.is_array()) throw FieldError(std::string("field '") + key + "' must be an array");
  if (expected != 0 && v.size() != expected) {
    throw FieldError(std::string("field '") + key + "' must have " + std::to_string(expected) +
                     " values, got " + std::to_string(v.size()));
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw FieldError(std::string("field '") + key + "' must hold numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d)) throw FieldError(std::string("field '") + key + "' must be finite");
    out.push_back(d);
  }
  return out;
}

Vec3 vec3(const Json& rec, const char* key) {
  const auto v = numbers(field(rec, key), key, 3);
  return {v[0], v[1], v[2]};
}

RigidTransform3 pose(const Json& rec) {
  RigidTransform3 t;
  const auto r = numbers(field(rec, "R"), "R", 9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) t.rotation(i, j) = r[static_cast<std::size_t>(3 * i + j)];
  }
  if (t.orthonormality_error() > 1e-6) throw FieldError("field 'R' is not a rotation matrix");
  t.translation = vec3(rec, "p");
  return t;
}

void put_pose(Json& rec, const RigidTransform3& t) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(t.rotation(i, j));
  }
  rec["R"] = std::move(r);
  rec["p"] = to_json(t.translation);
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

double confidence(const Json& rec) {
  const double c = number(rec, "confidence");
  if (c < 0.0 || c > 1.0) throw FieldError("confidence must be in [0,1]");
  return c;
}

BodyParams body_params(const Json& rec, std::size_t joints) {
  BodyParams p;
  const auto theta = numbers(field(rec, "theta"), "theta", 3 * joints);
  p.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  p.gamma = vec3(rec, "gamma");
  return p;
}

void put_params(Json& rec, const BodyParams& p) {
  rec["theta"] = vector_json(p.theta);
  rec["gamma"] = to_json(p.gamma);
}

// Iterates JSON Lines input, collecting per-line diagnostics.
template <typename Handler>
std::vector<Diagnostic> for_each_record(std::istream& in, Handler handle) {
  std::vector<Diagnostic> diags;
  std::string line;
  std::size_t number_of_line = 0;
  while (std::getline(in, line)) {
    ++number_of_line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json rec = Json::parse(line);
      if (!rec.is_object()) throw FieldError("record must be a JSON object");
      handle(number_of_line, rec);
    } catch (const Json::parse_error& e) {
      diags.push_back({number_of_line, std::string("invalid JSON: ") + e.what()});
    } catch (const std::exception& e) {
      diags.push_back({number_of_line, e.what()});
    }
  }
  return diags;
}

template <typename T>
void check_sorted(const std::vector<T>& items, const std::vector<std::size_t>& lines,
                  const char* stream, std::vector<Diagnostic>& diags, auto time_of) {
  for (std::size_t i = 1; i < items.size(); ++i) {
    if (time_of(items[i]) < time_of(items[i - 1])) {
      diags.push_back({lines[i], std::string(stream) + " records must be in time order"});
    }
  }
}

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
  std::ostringstream os;
  for (std::size_t i = 0; i < diags.size(); ++i) {
    if (i > 0) os << '\n';
    if (diags[i].line > 0) os << "line " << diags[i].line << ": ";
    os << diags[i].message;
  }
  return os.str();
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

SchemaError::SchemaError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(format_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

Sequence sequence_from_scenario(const Scenario& scenario) {
  Sequence seq;
  seq.frame_rate = scenario.frame_rate;
  seq.body = scenario.body;
  seq.objects = scenario.objects;
  seq.interactions = scenario.interactions;
  seq.streams = scenario.streams;
  return seq;
}

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const RigidTransform3& t) {
  Json j = Json::object();
  put_pose(j, t);
  return j;
}

RigidTransform3 transform_from_json(const Json& j) { return pose(j); }

Json to_json(const BodyModel& body) {
  Json joints = Json::array();
  for (const auto& jt : body.joints()) {
    joints.push_back({{"name", jt.name}, {"parent", jt.parent}, {"offset", to_json(jt.offset)}});
  }
  Json vertices = Json::object();
  for (const auto& [name, idx] : body.vertices()) vertices[name] = idx;
  return {{"joints", std::move(joints)}, {"vertices", std::move(vertices)}};
}

BodyModel body_model_from_json(const Json& j) {
  const Json& joints = field(j, "joints");
  if (!joints.is_array()) throw FieldError("field 'joints' must be an array");
  std::vector<Joint> out;
  for (const auto& jt : joints) {
    Joint joint;
    joint.name = text(jt, "name");
    const Json& parent = field(jt, "parent");
    if (!parent.is_number_integer()) throw FieldError("joint parent must be an integer");
    joint.parent = parent.get<int>();
    joint.offset = vec3(jt, "offset");
    out.push_back(std::move(joint));
  }
  std::map<std::string, int> vertices;
  const Json& v = field(j, "vertices");
  if (!v.is_object()) throw FieldError("field 'vertices' must be an object");
  for (const auto& [name, idx] : v.items()) {
    if (!idx.is_number_integer()) throw FieldError("vertex '" + name + "' must map to an integer");
    vertices[name] = idx.get<int>();
  }
  return BodyModel(std::move(out), std::move(vertices));
}

Json to_json(const CalibrationResult& calib) {
  return {{"x_wz", to_json(calib.x_wz)},
          {"x_ic", to_json(calib.x_ic)},
          {"time_offset", calib.time_offset},
          {"inlier_ratio", calib.inlier_ratio},
          {"rounds", calib.rounds}};
}

void write_sequence(std::ostream& out, const Sequence& seq) {
  auto emit = [&out](const Json& j) { out << j.dump() << '\n'; };
  emit({{"type", "header"},
        {"schema", "wearcap.sequence"},
        {"version", kSequenceVersion},
        {"frame_rate", seq.frame_rate},
        {"body_model", to_json(seq.body)}});
  for (const auto& obj : seq.objects) {
    Json points = Json::array();
    for (const auto& p : obj.points) points.push_back(to_json(p));
    Json rec = {{"type", "object"},
                {"id", obj.id},
                {"motion", to_string(obj.motion)},
                {"scan_pose", to_json(obj.scan_pose)},
                {"points", std::move(points)}};
    if (obj.motion == MotionModel::hinged) rec["hinge_point"] = to_json(obj.hinge_point);
    emit(rec);
  }
  for (const auto& l : seq.interactions) {
    emit({{"type", "interaction"},
          {"start", l.start},
          {"end", l.end},
          {"hands", to_string(l.hands)},
          {"object", l.object_id}});
  }
  for (std::size_t i = 0; i < seq.streams.imu_body.size(); ++i) {
    Json rec = {{"type", "imu"}, {"time", seq.streams.imu_body.times[i]}};
    put_params(rec, seq.streams.imu_body.frames[i]);
    emit(rec);
  }
  for (const auto& h : seq.streams.imu_head) {
    Json rec = {{"type", "imu_head"}, {"time", h.time}};
    put_pose(rec, h.pose);
    emit(rec);
  }
  for (const auto& c : seq.streams.localizations) {
    Json rec = {{"type", "localization"}, {"time", c.time}, {"confidence", c.confidence}};
    put_pose(rec, c.pose);
    emit(rec);
  }
  for (const auto& o : seq.streams.observations) {
    Json rec = {{"type", "object_observation"},
                {"time", o.time},
                {"object", o.object_id},
                {"confidence", o.confidence}};
    put_pose(rec, o.pose);
    emit(rec);
  }
}

Sequence read_sequence(std::istream& in) {
  Sequence seq;
  bool have_header = false;
  std::vector<std::size_t> imu_lines, head_lines, loc_lines, obs_lines, label_lines;
  std::map<std::string, std::size_t> object_lines;
  std::vector<std::pair<std::size_t, std::string>> referenced;  // (line, object id)

  auto diags = for_each_record(in, [&](std::size_t line, const Json& rec) {
    const std::string type = text(rec, "type");
    if (!have_header) {
      if (type != "header") throw FieldError("first record must be the header");
      if (text(rec, "schema") != "wearcap.sequence") throw FieldError("unknown schema");
      const Json& version = field(rec, "version");
      if (!version.is_number_integer() || version.get<int>() != kSequenceVersion) {
        throw FieldError("unsupported version (expected " + std::to_string(kSequenceVersion) + ")");
      }
      seq.frame_rate = number(rec, "frame_rate");
      if (!(seq.frame_rate > 0.0)) throw FieldError("frame_rate must be positive");
      seq.body = body_model_from_json(field(rec, "body_model"));
      have_header = true;
      return;
    }
    if (type == "header") {
      throw FieldError("duplicate header");
    } else if (type == "object") {
      ObjectModel obj;
      obj.id = text(rec, "id");
      obj.motion = parse_motion_model(text(rec, "motion"));
      obj.scan_pose = pose(field(rec, "scan_pose"));
      const Json& pts = field(rec, "points");
      if (!pts.is_array()) throw FieldError("field 'points' must be an array");
      for (const auto& p : pts) {
        const auto v = numbers(p, "points", 3);
        obj.points.emplace_back(v[0], v[1], v[2]);
      }
      if (obj.motion == MotionModel::hinged) obj.hinge_point = vec3(rec, "hinge_point");
      obj.validate();
      if (object_lines.count(obj.id) != 0) throw FieldError("duplicate object id '" + obj.id + "'");
      object_lines[obj.id] = line;
      seq.objects.push_back(std::move(obj));
    } else if (type == "interaction") {
      InteractionLabel l;
      l.start = number(rec, "start");
      l.end = number(rec, "end");
      l.hands = parse_hand_set(text(rec, "hands"));
      l.object_id = text(rec, "object");
      if (!(l.start < l.end)) throw FieldError("interaction must start before it ends");
      referenced.emplace_back(line, l.object_id);
      label_lines.push_back(line);
      seq.interactions.push_back(std::move(l));
    } else if (type == "imu") {
      seq.streams.imu_body.times.push_back(number(rec, "time"));
      seq.streams.imu_body.frames.push_back(body_params(rec, seq.body.joint_count()));
      imu_lines.push_back(line);
    } else if (type == "imu_head") {
      seq.streams.imu_head.push_back({number(rec, "time"), pose(rec), 1.0});
      head_lines.push_back(line);
    } else if (type == "localization") {
      seq.streams.localizations.push_back({number(rec, "time"), pose(rec), confidence(rec)});
      loc_lines.push_back(line);
    } else if (type == "object_observation") {
      ObjectObservation o;
      o.time = number(rec, "time");
      o.object_id = text(rec, "object");
      o.confidence = confidence(rec);
      o.pose = pose(rec);
      referenced.emplace_back(line, o.object_id);
      seq.streams.observations.push_back(std::move(o));
      obs_lines.push_back(line);
    } else {
      throw FieldError("unknown record type '" + type + "'");
    }
  });

  if (!have_header && diags.empty()) diags.push_back({0, "missing header record"});
  check_sorted(seq.streams.imu_body.times, imu_lines, "imu", diags, [](double t) { return t; });
  check_sorted(seq.streams.imu_head, head_lines, "imu_head", diags,
               [](const TimedPose& p) { return p.time; });
  check_sorted(seq.streams.localizations, loc_lines, "localization", diags,
               [](const TimedPose& p) { return p.time; });
  check_sorted(seq.streams.observations, obs_lines, "object_observation", diags,
               [](const ObjectObservation& o) { return o.time; });
  for (std::size_t i = 1; i < seq.interactions.size(); ++i) {
    if (!(seq.interactions[i - 1].end < seq.interactions[i].start)) {
      diags.push_back({label_lines[i], "interactions must be sorted and disjoint"});
    }
  }
  for (std::size_t i = 1; i < seq.streams.imu_body.times.size(); ++i) {
    if (seq.streams.imu_body.times[i] == seq.streams.imu_body.times[i - 1]) {
      diags.push_back({imu_lines[i], "duplicate imu timestamp"});
    }
  }
  for (const auto& [line, id] : referenced) {
    if (object_lines.count(id) == 0) diags.push_back({line, "unknown object '" + id + "'"});
  }
  if (have_header && seq.streams.imu_body.size() < 3) {
    diags.push_back({0, "sequence needs at least 3 imu records"});
  }
  if (!diags.empty()) {
    std::stable_sort(diags.begin(), diags.end(),
                     [](const auto& a, const auto& b) { return a.line < b.line; });
    throw SchemaError(std::move(diags));
  }
  return seq;
}

void write_sequence_file(const std::filesystem::path& path, const Sequence& seq) {
  auto out = open_out(path);
  write_sequence(out, seq);
}

Sequence read_sequence_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_sequence(in);
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
  auto emit = [&out](const Json& j) { out << j.dump() << '\n'; };
  emit({{"type", "header"}, {"schema", "wearcap.truth"}, {"version", kSequenceVersion}});
  for (const auto& l : truth.interactions) {
    emit({{"type", "interaction"},
          {"start", l.start},
          {"end", l.end},
          {"hands", to_string(l.hands)},
          {"object", l.object_id}});
  }
  for (std::size_t f = 0; f < truth.body.size(); ++f) {
    Json rec = {{"type", "frame"}, {"time", truth.body.times[f]}};
    put_params(rec, truth.body.frames[f]);
    Json objects = Json::object();
    for (const auto& [id, poses] : truth.object_poses) objects[id] = to_json(poses.at(f));
    rec["objects"] = std::move(objects);
    emit(rec);
  }
}

GroundTruth read_truth(std::istream& in) {
  GroundTruth truth;
  bool have_header = false;
  auto diags = for_each_record(in, [&](std::size_t, const Json& rec) {
    const std::string type = text(rec, "type");
    if (!have_header) {
      if (type != "header" || text(rec, "schema") != "wearcap.truth") {
        throw FieldError("first record must be the truth header");
      }
      have_header = true;
      return;
    }
    if (type == "interaction") {
      InteractionLabel l;
      l.start = number(rec, "start");
      l.end = number(rec, "end");
      l.hands = parse_hand_set(text(rec, "hands"));
      l.object_id = text(rec, "object");
      truth.interactions.push_back(std::move(l));
    } else if (type == "frame") {
      truth.body.times.push_back(number(rec, "time"));
      const std::size_t joints = field(rec, "theta").size() / 3;
      truth.body.frames.push_back(body_params(rec, joints));
      const Json& objects = field(rec, "objects");
      if (!objects.is_object()) throw FieldError("field 'objects' must be an object");
      for (const auto& [id, p] : objects.items()) truth.object_poses[id].push_back(pose(p));
    } else {
      throw FieldError("unknown record type '" + type + "'");
    }
  });
  if (!have_header && diags.empty()) diags.push_back({0, "missing truth header"});
  if (!diags.empty()) throw SchemaError(std::move(diags));
  return truth;
}

void write_truth_file(const std::filesystem::path& path, const GroundTruth& truth) {
  auto out = open_out(path);
  write_truth(out, truth);
}

GroundTruth read_truth_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_truth(in);
}

void write_body(std::ostream& out, const BodySequence& body) {
  for (std::size_t f = 0; f < body.size(); ++f) {
    Json rec = {{"time", body.times[f]}};
    put_params(rec, body.frames[f]);
    out << rec.dump() << '\n';
  }
}

void write_objects(std::ostream& out, const MotionEstimate& estimate) {
  for (std::size_t f = 0; f < estimate.body.size(); ++f) {
    for (const auto& [id, poses] : estimate.object_poses) {
      Json rec = {{"time", estimate.body.times[f]}, {"object", id}};
      put_pose(rec, poses.at(f));
      out << rec.dump() << '\n';
    }
  }
}

MotionEstimate read_estimate(std::istream& body_in, std::istream& objects_in) {
  MotionEstimate est;
  auto diags = for_each_record(body_in, [&](std::size_t, const Json& rec) {
    est.body.times.push_back(number(rec, "time"));
    est.body.frames.push_back(body_params(rec, field(rec, "theta").size() / 3));
  });
  auto more = for_each_record(objects_in, [&](std::size_t, const Json& rec) {
    est.object_poses[text(rec, "object")].push_back(pose(rec));
  });
  diags.insert(diags.end(), more.begin(), more.end());
  for (const auto& [id, poses] : est.object_poses) {
    if (poses.size() != est.body.size()) {
      diags.push_back({0, "object '" + id + "' has " + std::to_string(poses.size()) +
                              " poses for " + std::to_string(est.body.size()) + " frames"});
    }
  }
  if (!diags.empty()) throw SchemaError(std::move(diags));
  return est;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace wearcap
