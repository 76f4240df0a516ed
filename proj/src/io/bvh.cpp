#include "meshret/io/bvh.hpp"

#include "meshret/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace meshret {

const char* bvh_channel_name(BvhChannel c) {
  switch (c) {
    case BvhChannel::Xposition: return "Xposition";
    case BvhChannel::Yposition: return "Yposition";
    case BvhChannel::Zposition: return "Zposition";
    case BvhChannel::Xrotation: return "Xrotation";
    case BvhChannel::Yrotation: return "Yrotation";
    case BvhChannel::Zrotation: return "Zrotation";
  }
  return "Xposition";
}

namespace {

bool is_rotation(BvhChannel c) {
  return c == BvhChannel::Xrotation || c == BvhChannel::Yrotation || c == BvhChannel::Zrotation;
}

int axis_of(BvhChannel c) {
  switch (c) {
    case BvhChannel::Xposition:
    case BvhChannel::Xrotation: return 0;
    case BvhChannel::Yposition:
    case BvhChannel::Yrotation: return 1;
    default: return 2;
  }
}

struct Token {
  std::string text;
  int line = 0;
};

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  bool done() const { return pos_ >= tokens_.size(); }
  const Token& peek() const {
    if (done()) fail("unexpected end of file");
    return tokens_[pos_];
  }
  Token next() {
    const Token& t = peek();
    ++pos_;
    return t;
  }
  void expect(const std::string& word) {
    const Token t = next();
    if (t.text != word) fail(t.line, "expected '" + word + "', found '" + t.text + "'");
  }
  double number() {
    const Token t = next();
    return parse_number(t);
  }
  int last_line() const { return tokens_.empty() ? 1 : tokens_.back().line; }

  static double parse_number(const Token& t) {
    try {
      std::size_t used = 0;
      const double v = std::stod(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(t.line, "expected a number, found '" + t.text + "'");
    }
  }
  [[noreturn]] static void fail(int line, const std::string& msg) {
    throw ParseError("bvh line " + std::to_string(line) + ": " + msg);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail(last_line(), msg); }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

BvhChannel parse_channel(const Token& t) {
  static const std::pair<const char*, BvhChannel> names[] = {
      {"Xposition", BvhChannel::Xposition}, {"Yposition", BvhChannel::Yposition},
      {"Zposition", BvhChannel::Zposition}, {"Xrotation", BvhChannel::Xrotation},
      {"Yrotation", BvhChannel::Yrotation}, {"Zrotation", BvhChannel::Zrotation}};
  for (const auto& [n, c] : names) {
    if (t.text == n) return c;
  }
  TokenStream::fail(t.line, "unknown channel '" + t.text + "'");
}

void check_channel_layout(const BvhJoint& j, int line) {
  std::vector<int> pos, rot;
  for (BvhChannel c : j.channels) (is_rotation(c) ? rot : pos).push_back(axis_of(c));
  auto fail = [&](const std::string& msg) {
    if (line > 0) TokenStream::fail(line, msg);
    throw ValidationError(msg);
  };
  if (!pos.empty() && pos != std::vector<int>{0, 1, 2}) {
    fail("joint '" + j.name + "': unsupported position channel order (XYZ required)");
  }
  if (!rot.empty()) {
    std::vector<int> sorted = rot;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::vector<int>{0, 1, 2}) {
      fail("joint '" + j.name + "': unsupported rotation channel order");
    }
  }
}

void parse_joint(TokenStream& ts, BvhDocument& doc, int parent) {
  BvhJoint joint;
  joint.name = ts.next().text;
  joint.parent = parent;
  ts.expect("{");
  ts.expect("OFFSET");
  for (int k = 0; k < 3; ++k) joint.offset[k] = ts.number();
  int channel_line = 0;
  if (ts.peek().text == "CHANNELS") {
    channel_line = ts.next().line;
    const Token count = ts.next();
    const double n = TokenStream::parse_number(count);
    if (n < 0 || n > 6 || n != std::floor(n)) TokenStream::fail(count.line, "bad channel count");
    for (int k = 0; k < static_cast<int>(n); ++k) joint.channels.push_back(parse_channel(ts.next()));
  }
  check_channel_layout(joint, channel_line);
  const int self = static_cast<int>(doc.joints.size());
  doc.joints.push_back(joint);
  while (true) {
    const Token t = ts.next();
    if (t.text == "}") return;
    if (t.text == "JOINT") {
      parse_joint(ts, doc, self);
    } else if (t.text == "End") {
      ts.expect("Site");
      ts.expect("{");
      ts.expect("OFFSET");
      Vec3 e;
      for (int k = 0; k < 3; ++k) e[k] = ts.number();
      ts.expect("}");
      doc.joints[self].end_site = e;
    } else {
      TokenStream::fail(t.line, "unexpected '" + t.text + "' in joint '" + joint.name + "'");
    }
  }
}

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

int BvhDocument::num_channels() const {
  int n = 0;
  for (const auto& j : joints) n += static_cast<int>(j.channels.size());
  return n;
}

std::optional<int> BvhDocument::find_joint(std::string_view name) const {
  for (int i = 0; i < static_cast<int>(joints.size()); ++i) {
    if (joints[i].name == name) return i;
  }
  return std::nullopt;
}

void BvhDocument::validate() const {
  if (!(frame_time > 0.0)) throw ValidationError("bvh frame time must be positive");
  if (joints.empty()) throw ValidationError("bvh document has no joints");
  std::set<std::string> names;
  for (int i = 0; i < static_cast<int>(joints.size()); ++i) {
    const auto& j = joints[i];
    if (!names.insert(j.name).second) throw ValidationError("duplicate bvh joint '" + j.name + "'");
    if (i == 0 ? j.parent != -1 : (j.parent < 0 || j.parent >= i)) {
      throw ValidationError("bvh joint '" + j.name + "' has an invalid parent");
    }
    check_channel_layout(j, 0);
  }
  const int n = num_channels();
  for (int f = 0; f < num_frames(); ++f) {
    if (static_cast<int>(frames[f].size()) != n) {
      throw ValidationError("channel-count mismatch: frame " + std::to_string(f) + " has " +
                            std::to_string(frames[f].size()) + " values, hierarchy declares " +
                            std::to_string(n));
    }
  }
}

BvhDocument parse_bvh(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }
  std::size_t motion_line = lines.size();
  std::vector<Token> hierarchy;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::istringstream is(lines[i]);
    std::string w;
    bool first = true;
    while (is >> w) {
      if (first && w == "MOTION") {
        motion_line = i;
        break;
      }
      first = false;
      hierarchy.push_back({w, static_cast<int>(i + 1)});
    }
    if (motion_line == i) break;
  }

  BvhDocument doc;
  TokenStream ts(std::move(hierarchy));
  ts.expect("HIERARCHY");
  ts.expect("ROOT");
  parse_joint(ts, doc, -1);
  if (!ts.done()) {
    const Token t = ts.next();
    TokenStream::fail(t.line, "unexpected '" + t.text + "' after the root joint");
  }
  if (motion_line >= lines.size()) {
    TokenStream::fail(static_cast<int>(lines.size()), "missing MOTION section");
  }

  std::size_t li = motion_line + 1;
  auto next_content = [&]() -> std::vector<std::string> {
    while (li < lines.size()) {
      std::istringstream is(lines[li]);
      std::vector<std::string> words;
      std::string w;
      while (is >> w) words.push_back(w);
      ++li;
      if (!words.empty()) return words;
    }
    return {};
  };
  auto line_no = [&]() { return static_cast<int>(li); };

  std::vector<std::string> w = next_content();
  if (w.size() != 2 || w[0] != "Frames:") TokenStream::fail(line_no(), "expected 'Frames: <count>'");
  const double frame_count = TokenStream::parse_number({w[1], line_no()});
  if (frame_count < 0 || frame_count != std::floor(frame_count)) {
    TokenStream::fail(line_no(), "bad frame count");
  }
  w = next_content();
  if (w.size() != 3 || w[0] != "Frame" || w[1] != "Time:") {
    TokenStream::fail(line_no(), "expected 'Frame Time: <seconds>'");
  }
  doc.frame_time = TokenStream::parse_number({w[2], line_no()});
  if (!(doc.frame_time > 0.0)) TokenStream::fail(line_no(), "frame time must be positive");

  const int channels = doc.num_channels();
  const int expected = static_cast<int>(frame_count);
  while (true) {
    w = next_content();
    if (w.empty()) break;
    if (static_cast<int>(w.size()) != channels) {
      TokenStream::fail(line_no(), "channel-count mismatch: " + std::to_string(w.size()) +
                                       " values, hierarchy declares " + std::to_string(channels));
    }
    std::vector<double> values;
    values.reserve(channels);
    for (const auto& s : w) values.push_back(TokenStream::parse_number({s, line_no()}));
    doc.frames.push_back(std::move(values));
  }
  if (doc.num_frames() != expected) {
    TokenStream::fail(line_no(), "channel-count mismatch: header declares " +
                                     std::to_string(expected) + " frames, found " +
                                     std::to_string(doc.num_frames()));
  }
  return doc;
}

BvhDocument load_bvh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bvh file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_bvh(ss.str());
}

std::string serialize_bvh(const BvhDocument& doc) {
  doc.validate();
  std::ostringstream os;
  os << "HIERARCHY\n";
  std::vector<std::vector<int>> children(doc.joints.size());
  for (int i = 1; i < static_cast<int>(doc.joints.size()); ++i) children[doc.joints[i].parent].push_back(i);
  auto write = [&](auto&& self, int i, int depth) -> void {
    const std::string pad(2 * depth, ' ');
    const auto& j = doc.joints[i];
    os << pad << (i == 0 ? "ROOT " : "JOINT ") << j.name << "\n" << pad << "{\n";
    os << pad << "  OFFSET " << format_number(j.offset.x()) << " " << format_number(j.offset.y())
       << " " << format_number(j.offset.z()) << "\n";
    if (!j.channels.empty()) {
      os << pad << "  CHANNELS " << j.channels.size();
      for (BvhChannel c : j.channels) os << " " << bvh_channel_name(c);
      os << "\n";
    }
    for (int c : children[i]) self(self, c, depth + 1);
    if (j.end_site) {
      os << pad << "  End Site\n" << pad << "  {\n" << pad << "    OFFSET "
         << format_number(j.end_site->x()) << " " << format_number(j.end_site->y()) << " "
         << format_number(j.end_site->z()) << "\n" << pad << "  }\n";
    }
    os << pad << "}\n";
  };
  write(write, 0, 0);
  os << "MOTION\nFrames: " << doc.num_frames() << "\nFrame Time: " << format_number(doc.frame_time)
     << "\n";
  for (const auto& f : doc.frames) {
    for (std::size_t k = 0; k < f.size(); ++k) os << (k ? " " : "") << format_number(f[k]);
    os << "\n";
  }
  return os.str();
}

std::vector<Pose> bvh_joint_poses(const BvhDocument& doc, int frame) {
  if (frame < 0 || frame >= doc.num_frames()) throw ValidationError("bvh frame index out of range");
  const auto& values = doc.frames[frame];
  std::vector<Pose> out(doc.joints.size());
  int c = 0;
  const double deg = std::acos(-1.0) / 180.0;
  for (std::size_t i = 0; i < doc.joints.size(); ++i) {
    const auto& j = doc.joints[i];
    Vec3 t = j.offset;
    Mat3 R = Mat3::Identity();
    for (BvhChannel ch : j.channels) {
      const double v = values.at(c++);
      if (is_rotation(ch)) {
        R = R * Eigen::AngleAxisd(v * deg, Vec3::Unit(axis_of(ch))).toRotationMatrix();
      } else {
        t[axis_of(ch)] += v;
      }
    }
    Pose local = Pose::Identity();
    local.linear() = R;
    local.translation() = t;
    out[i] = j.parent < 0 ? local : out[j.parent] * local;
  }
  return out;
}

BvhImport default_bvh_import(const BvhDocument& doc) {
  BvhImport imp;
  for (const auto& j : doc.joints) {
    imp.keypoints.emplace_back(j.name, j.name);
    if (j.end_site) imp.keypoints.emplace_back(j.name + "_end", j.name + "/end");
  }
  return imp;
}

SourceMotion bvh_to_source(const BvhDocument& doc, const BvhImport& import) {
  doc.validate();
  if (!(import.unit_scale > 0.0)) throw ValidationError("bvh unit scale must be positive");
  if (import.keypoints.empty()) throw ValidationError("no keypoints selected from the bvh file");
  struct Pick {
    int joint;
    bool end;
  };
  std::vector<Pick> picks;
  SourceMotion m;
  for (const auto& [kp, joint] : import.keypoints) {
    std::string name = joint;
    bool end = false;
    if (name.size() > 4 && name.compare(name.size() - 4, 4, "/end") == 0) {
      name.resize(name.size() - 4);
      end = true;
    }
    const auto j = doc.find_joint(name);
    if (!j) throw ValidationError("bvh file has no joint '" + name + "'");
    if (end && !doc.joints[*j].end_site) {
      throw ValidationError("bvh joint '" + name + "' has no End Site");
    }
    picks.push_back({*j, end});
    m.keypoint_names.push_back(kp);
  }
  m.dt = doc.frame_time;
  Mat3 axes = Mat3::Identity();
  if (import.up == UpAxis::Y) axes << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  m.frames.reserve(doc.num_frames());
  for (int f = 0; f < doc.num_frames(); ++f) {
    const auto poses = bvh_joint_poses(doc, f);
    PointList kp;
    for (const auto& p : picks) {
      const Vec3 local = p.end ? *doc.joints[p.joint].end_site : Vec3::Zero();
      kp.push_back(import.unit_scale * (axes * (poses[p.joint] * local)));
    }
    m.frames.push_back(std::move(kp));
  }
  if (import.demonstrator_height) {
    m.height = *import.demonstrator_height;
  } else {
    const auto head = m.find_keypoint(import.head_keypoint);
    if (!head) {
      throw ValidationError("no demonstrator height given and no '" + import.head_keypoint +
                            "' keypoint to estimate it");
    }
    double h = -std::numeric_limits<double>::infinity();
    for (int f = 0; f < std::min(30, m.num_frames()); ++f) h = std::max(h, m.frames[f][*head].z());
    if (!(h > 0.0)) throw ValidationError("estimated demonstrator height is not positive");
    m.height = h;
  }
  m.validate();
  return m;
}

}  // namespace meshret
