#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "lift3d/camera.hpp"
#include "lift3d/error.hpp"
#include "lift3d/skeleton.hpp"
#include "lift3d/synth.hpp"
#include "lift3d/triangulation.hpp"

namespace lift3d {

// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {
inline double parse_double(const std::string& s, const std::string& where) {
  const char* c = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(c, &end);
  require(end != c && end && *end == '\0', errc::format_error,
          "bad number '" + s + "' in " + where);
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace detail

// gt3d.csv / prediction files: header comment pinning the coordinate frame,
// then "frame,joint,x,y,z" rows in frame-major order, mm, full precision.
inline void write_sequence3d_csv(const std::filesystem::path& path,
                                 const Sequence3D& seq) {
  require(!seq.empty(), errc::shape_error, "refusing to write an empty sequence");
  std::ofstream os(path);
  require(os.good(), errc::io_error, "cannot write '" + path.string() + "'");
  os << "# coordinate-frame: " << seq.front().frame.str() << "\n";
  os << "frame,joint,x,y,z\n";
  for (std::size_t f = 0; f < seq.size(); ++f) {
    require(seq[f].frame == seq.front().frame, errc::coordinate_frame,
            "mixed coordinate frames in one sequence");
    for (int j = 0; j < seq[f].joints(); ++j) {
      const auto& c = seq[f].coords[static_cast<std::size_t>(j)];
      os << f << ',' << j << ',' << format_double(c.x()) << ','
         << format_double(c.y()) << ',' << format_double(c.z()) << '\n';
    }
  }
  require(os.good(), errc::io_error, "write failed for '" + path.string() + "'");
}

inline Sequence3D read_sequence3d_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), errc::io_error, "missing file '" + path.string() + "'");
  std::string line;
  FrameTag tag = FrameTag::world();
  bool saw_header = false;
  Sequence3D seq;
  std::int64_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("coordinate-frame:");
      if (pos != std::string::npos) {
        std::string t = line.substr(pos + 17);
        while (!t.empty() && t.front() == ' ') t.erase(t.begin());
        tag = FrameTag::parse(t);
      }
      continue;
    }
    if (!saw_header) {  // column header row
      require(line.rfind("frame,joint,x,y,z", 0) == 0, errc::format_error,
              "unexpected 3D CSV header in '" + path.string() + "'");
      saw_header = true;
      continue;
    }
    const auto cols = detail::split_csv(line);
    require(cols.size() == 5, errc::format_error,
            "expected 5 columns at line " + std::to_string(row) + " of '" +
                path.string() + "'");
    const auto where = path.string() + ":" + std::to_string(row);
    const auto frame = static_cast<std::size_t>(
        detail::parse_double(cols[0], where));
    const int joint = static_cast<int>(detail::parse_double(cols[1], where));
    if (frame >= seq.size()) seq.resize(frame + 1);
    Pose3D& p = seq[frame];
    if (joint >= p.joints())
      p.coords.resize(static_cast<std::size_t>(joint) + 1,
                      Eigen::Vector3d::Zero());
    p.coords[static_cast<std::size_t>(joint)] =
        Eigen::Vector3d(detail::parse_double(cols[2], where),
                        detail::parse_double(cols[3], where),
                        detail::parse_double(cols[4], where));
  }
  require(!seq.empty(), errc::format_error, "no rows in '" + path.string() + "'");
  for (auto& p : seq) p.frame = tag;
  return seq;
}

// det2d_<camid>.csv: "frame,joint,u,v,confidence" rows, pixels.
inline void write_sequence2d_csv(const std::filesystem::path& path,
                                 const Sequence2D& seq) {
  require(!seq.empty(), errc::shape_error, "refusing to write an empty sequence");
  std::ofstream os(path);
  require(os.good(), errc::io_error, "cannot write '" + path.string() + "'");
  os << "frame,joint,u,v,confidence\n";
  for (std::size_t f = 0; f < seq.size(); ++f) {
    for (int j = 0; j < seq[f].joints(); ++j) {
      const auto& c = seq[f].coords[static_cast<std::size_t>(j)];
      os << f << ',' << j << ',' << format_double(c.x()) << ','
         << format_double(c.y()) << ','
         << format_double(seq[f].confidence_at(j)) << '\n';
    }
  }
  require(os.good(), errc::io_error, "write failed for '" + path.string() + "'");
}

inline Sequence2D read_sequence2d_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), errc::io_error, "missing file '" + path.string() + "'");
  std::string line;
  bool saw_header = false;
  Sequence2D seq;
  std::int64_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      require(line.rfind("frame,joint,u,v,confidence", 0) == 0, errc::format_error,
              "unexpected 2D CSV header in '" + path.string() + "'");
      saw_header = true;
      continue;
    }
    const auto cols = detail::split_csv(line);
    require(cols.size() == 5, errc::format_error,
            "expected 5 columns at line " + std::to_string(row) + " of '" +
                path.string() + "'");
    const auto where = path.string() + ":" + std::to_string(row);
    const auto frame = static_cast<std::size_t>(
        detail::parse_double(cols[0], where));
    const int joint = static_cast<int>(detail::parse_double(cols[1], where));
    if (frame >= seq.size()) seq.resize(frame + 1);
    Pose2D& p = seq[frame];
    if (joint >= p.joints()) {
      p.coords.resize(static_cast<std::size_t>(joint) + 1,
                      Eigen::Vector2d::Zero());
      if (!p.confidence) p.confidence.emplace();
      p.confidence->resize(static_cast<std::size_t>(joint) + 1, 1.0);
    }
    p.coords[static_cast<std::size_t>(joint)] =
        Eigen::Vector2d(detail::parse_double(cols[2], where),
                        detail::parse_double(cols[3], where));
    (*p.confidence)[static_cast<std::size_t>(joint)] =
        detail::parse_double(cols[4], where);
  }
  require(!seq.empty(), errc::format_error, "no rows in '" + path.string() + "'");
  return seq;
}

// Triangulated pseudo-labels with their diagnostics:
// "frame,joint,x,y,z,residual_px,valid".
inline void write_pseudo_csv(const std::filesystem::path& path,
                             const std::vector<TriangulatedPose>& poses) {
  require(!poses.empty(), errc::shape_error, "no pseudo-labels to write");
  std::ofstream os(path);
  require(os.good(), errc::io_error, "cannot write '" + path.string() + "'");
  os << "# coordinate-frame: world\n";
  os << "frame,joint,x,y,z,residual_px,valid\n";
  for (std::size_t f = 0; f < poses.size(); ++f) {
    const auto& tp = poses[f];
    for (int j = 0; j < tp.pose.joints(); ++j) {
      const auto& c = tp.pose.coords[static_cast<std::size_t>(j)];
      os << f << ',' << j << ',' << format_double(c.x()) << ','
         << format_double(c.y()) << ',' << format_double(c.z()) << ','
         << format_double(tp.residual_px[static_cast<std::size_t>(j)]) << ','
         << int(tp.valid[static_cast<std::size_t>(j)]) << '\n';
    }
  }
  require(os.good(), errc::io_error, "write failed for '" + path.string() + "'");
}

inline std::vector<TriangulatedPose> read_pseudo_csv(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), errc::io_error, "missing file '" + path.string() + "'");
  std::string line;
  bool saw_header = false;
  std::vector<TriangulatedPose> out;
  std::int64_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      require(line.rfind("frame,joint,x,y,z,residual_px,valid", 0) == 0,
              errc::format_error,
              "unexpected pseudo-label CSV header in '" + path.string() + "'");
      saw_header = true;
      continue;
    }
    const auto cols = detail::split_csv(line);
    require(cols.size() == 7, errc::format_error,
            "expected 7 columns at line " + std::to_string(row) + " of '" +
                path.string() + "'");
    const auto where = path.string() + ":" + std::to_string(row);
    const auto frame = static_cast<std::size_t>(
        detail::parse_double(cols[0], where));
    const int joint = static_cast<int>(detail::parse_double(cols[1], where));
    if (frame >= out.size()) out.resize(frame + 1);
    TriangulatedPose& tp = out[frame];
    tp.pose.frame = FrameTag::world();
    if (joint >= tp.pose.joints()) {
      tp.pose.coords.resize(static_cast<std::size_t>(joint) + 1,
                            Eigen::Vector3d::Zero());
      tp.residual_px.resize(static_cast<std::size_t>(joint) + 1, 0.0);
      tp.valid.resize(static_cast<std::size_t>(joint) + 1, 0);
    }
    tp.pose.coords[static_cast<std::size_t>(joint)] =
        Eigen::Vector3d(detail::parse_double(cols[2], where),
                        detail::parse_double(cols[3], where),
                        detail::parse_double(cols[4], where));
    tp.residual_px[static_cast<std::size_t>(joint)] =
        detail::parse_double(cols[5], where);
    tp.valid[static_cast<std::size_t>(joint)] =
        detail::parse_double(cols[6], where) != 0 ? 1 : 0;
  }
  require(!out.empty(), errc::format_error, "no rows in '" + path.string() + "'");
  for (auto& tp : out) {
    tp.valid_count = 0;
    for (auto v : tp.valid) tp.valid_count += v;
  }
  return out;
}

// A dataset directory: rig.json, joints.json, meta.json, gt3d.csv (optional
// for detection-only bundles), det2d_<camid>.csv per rig camera.
struct DatasetBundle {
  JointSet joints;
  std::vector<Camera> rig;
  std::vector<Sequence2D> detections;  // aligned with rig order
  Sequence3D gt_world;                 // empty when absent
  double fps = 50;
  nlohmann::json meta;                 // generator provenance

  bool has_gt() const { return !gt_world.empty(); }
  std::int64_t frames() const {
    return detections.empty() ? 0
                              : static_cast<std::int64_t>(detections[0].size());
  }

  void validate() const {
    joints.validate();
    require(!rig.empty(), errc::config_error, "bundle has no cameras");
    require(detections.size() == rig.size(), errc::camera_mismatch,
            "bundle has " + std::to_string(detections.size()) +
                " detection sequences for " + std::to_string(rig.size()) +
                " cameras");
    const std::size_t F = detections.empty() ? 0 : detections[0].size();
    for (std::size_t c = 0; c < detections.size(); ++c) {
      require(detections[c].size() == F, errc::shape_error,
              "camera '" + rig[c].id + "' has a different frame count");
      for (const auto& p : detections[c])
        require(p.joints() == joints.size(), errc::shape_error,
                "detection joint count mismatch in camera '" + rig[c].id + "'");
    }
    if (has_gt()) {
      require(gt_world.size() == F, errc::shape_error,
              "ground truth frame count does not match detections");
      for (const auto& p : gt_world)
        require(p.frame.is_world(), errc::coordinate_frame,
                "ground truth must be world-frame");
    }
  }
};

inline void write_dataset(const std::filesystem::path& dir,
                          const DatasetBundle& bundle) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "rig.json");
    require(os.good(), errc::io_error, "cannot write rig.json");
    os << rig_to_json(bundle.rig).dump(2) << "\n";
  }
  {
    std::ofstream os(dir / "joints.json");
    require(os.good(), errc::io_error, "cannot write joints.json");
    os << bundle.joints.to_json().dump(2) << "\n";
  }
  {
    nlohmann::json meta = bundle.meta;
    meta["fps"] = bundle.fps;
    meta["frames"] = bundle.frames();
    std::ofstream os(dir / "meta.json");
    require(os.good(), errc::io_error, "cannot write meta.json");
    os << meta.dump(2) << "\n";
  }
  if (bundle.has_gt()) write_sequence3d_csv(dir / "gt3d.csv", bundle.gt_world);
  for (std::size_t c = 0; c < bundle.rig.size(); ++c)
    write_sequence2d_csv(dir / ("det2d_" + bundle.rig[c].id + ".csv"),
                         bundle.detections[c]);
}

inline DatasetBundle read_dataset(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), errc::io_error,
          "dataset directory '" + dir.string() + "' does not exist");
  DatasetBundle b;
  {
    std::ifstream is(dir / "rig.json");
    require(is.good(), errc::io_error, "missing rig.json in '" + dir.string() + "'");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(errc::format_error, std::string("bad rig.json: ") + e.what());
    }
    b.rig = rig_from_json(j);
  }
  {
    std::ifstream is(dir / "joints.json");
    require(is.good(), errc::io_error, "missing joints.json in '" + dir.string() + "'");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(errc::format_error, std::string("bad joints.json: ") + e.what());
    }
    b.joints = JointSet::from_json(j);
  }
  if (std::filesystem::exists(dir / "meta.json")) {
    std::ifstream is(dir / "meta.json");
    try {
      is >> b.meta;
    } catch (const nlohmann::json::exception& e) {
      fail(errc::format_error, std::string("bad meta.json: ") + e.what());
    }
    b.fps = b.meta.value("fps", 50.0);
  }
  for (const auto& cam : b.rig) {
    const auto path = dir / ("det2d_" + cam.id + ".csv");
    require(std::filesystem::exists(path), errc::camera_mismatch,
            "rig camera '" + cam.id + "' has no detection file " +
                path.string());
    b.detections.push_back(read_sequence2d_csv(path));
  }
  if (std::filesystem::exists(dir / "gt3d.csv"))
    b.gt_world = read_sequence3d_csv(dir / "gt3d.csv");
  b.validate();
  return b;
}

}  // namespace lift3d
