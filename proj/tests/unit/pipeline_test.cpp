#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>
#include <thread>

#include <json.hpp>

#include "worldmesh/geom/ray.hpp"
#include "worldmesh/hash.hpp"
#include "worldmesh/meshio.hpp"
#include "worldmesh/pipeline.hpp"

using namespace worldmesh;
namespace fs = std::filesystem;

namespace {

const fs::path kLayouts = fs::path(WORLDMESH_FIXTURE_DIR) / "layouts";

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

RunConfig small_config(const std::string& layout, const fs::path& out) {
  RunConfig cfg;
  cfg.theme = "a quiet scandinavian flat";
  cfg.seed = 7;
  cfg.out_dir = out;
  cfg.layout.source = (kLayouts / layout).string();
  cfg.cameras.width = 172;
  cfg.cameras.height = 96;
  cfg.texels_per_meter = 16;
  return cfg;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
  return out;
}

}  // namespace

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.theme = "a \"loft\"";
  c.seed = 123456789012345ULL;
  c.cameras.perimeter_count = 12;
  c.verify.delta = 7;
  c.loss.lambda_d = 0.5;
  c.depth.kind = "constant";
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.cameras.perimeter_count, 12);
}

TEST(RunConfig, MissingKeysKeepDefaults) {
  const RunConfig c = RunConfig::from_json(R"({"theme": "x", "cameras": {"width": 320}})");
  EXPECT_EQ(c.cameras.width, 320);
  EXPECT_EQ(c.cameras.height, CameraConfig{}.height);
  EXPECT_EQ(c.max_retries, 4);
  EXPECT_DOUBLE_EQ(c.loss.lambda_s, 0.2);
}

TEST(RunConfig, ValidateRejectsOutOfRange) {
  RunConfig c;
  c.theme = "t";
  c.layout.source = "x.json";
  EXPECT_NO_THROW(c.validate());
  auto expect_bad = [&](auto mutate) {
    RunConfig b = c;
    mutate(b);
    try {
      b.validate();
      ADD_FAILURE() << "accepted an invalid config";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
  };
  expect_bad([](RunConfig& b) { b.theme.clear(); });
  expect_bad([](RunConfig& b) { b.image.kind = "magic"; });
  expect_bad([](RunConfig& b) { b.cameras.hfov_deg = 180; });
  expect_bad([](RunConfig& b) { b.depth_range.far = 0.1; });
  expect_bad([](RunConfig& b) { b.max_retries = 0; });
  expect_bad([](RunConfig& b) { b.verify.threshold = 1.5; });
  expect_bad([](RunConfig& b) { b.layout.source.clear(); });
}

TEST(RunConfig, MalformedJsonIsSchemaError) {
  try {
    RunConfig::from_json("{\"seed\": \"seven\"}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
  }
}

TEST(Prompts, ThemeSubstitution) {
  const std::string p = synthesis_prompt("a sunlit attic");
  EXPECT_EQ(p.find("{theme}"), std::string::npos);
  EXPECT_NE(p.find("\"a sunlit attic\""), std::string::npos);
  EXPECT_EQ(synthesis_prompt("x").rfind("The scene depicts a", 0), 0u);
}

TEST(Prompts, ObjectPromptCountsOpenings) {
  const FloorPlan plan = load_layout(kLayouts / "three_room.json");
  const std::string p = object_prompt(plan.rooms[0], "a farmhouse");
  EXPECT_NE(p.find("living room"), std::string::npos);
  EXPECT_NE(p.find("2 doorways"), std::string::npos);
  EXPECT_NE(p.find("1 window"), std::string::npos);
}

TEST(MockImageAdapter, DeterministicAndSeeded) {
  Image8 cond(20, 10, 3);
  for (std::size_t i = 0; i < cond.data.size(); ++i) cond.data[i] = static_cast<std::uint8_t>(i * 7);
  MockImageAdapter a("theme");
  ImageRequest r{cond, std::nullopt, "p", 1, "v"};
  const Image8 x = a.generate(r);
  EXPECT_EQ(x, a.generate(r));
  EXPECT_EQ(x.width, 20);
  EXPECT_EQ(x.channels, 3);
  r.seed = 99;
  Image8 style(4, 4, 3, 10);
  r.style = style;
  EXPECT_NE(x, a.generate(r));
}

TEST(DirectoryImageAdapter, WaitsForResponse) {
  const auto dir = fresh_dir("worldmesh_image_exchange");
  Image8 cond(8, 8, 3, 50);
  ImageRequest r{cond, std::nullopt, "hello", 0x2a, "room/c00"};
  const fs::path response = dir / "room__c00__s2a" / "image.png";
  Image8 answer(8, 8, 3, 200);
  std::thread responder([&] {
    while (!fs::exists(dir / "room__c00__s2a" / "prompt.txt")) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    write_png(response.string() + ".tmp", answer);
    fs::rename(response.string() + ".tmp", response);
  });
  DirectoryImageAdapter adapter(dir, 30);
  const Image8 got = adapter.generate(r);
  responder.join();
  EXPECT_EQ(got, answer);
  EXPECT_EQ(read_text(dir / "room__c00__s2a" / "prompt.txt"), "hello");
  EXPECT_EQ(read_png(dir / "room__c00__s2a" / "condition.png"), cond);
}

TEST(DirectoryImageAdapter, TimesOut) {
  const auto dir = fresh_dir("worldmesh_image_timeout");
  DirectoryImageAdapter adapter(dir, 0);
  try {
    adapter.generate({Image8(4, 4, 3), std::nullopt, "p", 0, "v"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAdapterFailure);
  }
}

TEST(CommandImageAdapter, EchoesConditionThroughShell) {
  Image8 cond(6, 5, 3);
  for (std::size_t i = 0; i < cond.data.size(); ++i) cond.data[i] = static_cast<std::uint8_t>(i);
  CommandImageAdapter adapter(R"(sed 's/.*"condition_png":\("[^"]*"\).*/{"image_png":\1}/')");
  EXPECT_EQ(adapter.generate({cond, std::nullopt, "a \"quoted\" prompt", 3, "v"}), cond);
}

TEST(ImageResponse, RejectsGarbage) {
  for (const char* body : {"not json", "{}", "{\"image_png\": \"@@@\"}"}) {
    try {
      image_response(body);
      ADD_FAILURE() << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kAdapterFailure) << body;
    }
  }
}

TEST(EchoDepthAdapter, ReturnsLastDepth) {
  EchoDepthAdapter a;
  DepthMap d(4, 3, 2.5);
  d.at(1, 1) = DepthMap::kNoHit;
  a.set(d);
  EXPECT_EQ(a.estimate(Image8(4, 3, 3)), d);
  EXPECT_THROW(a.estimate(Image8(5, 3, 3)), Error);
}

TEST(MeshIo, LosslessRoundTrip) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  TriMesh m = make_box(Vec3(u(rng), u(rng), u(rng)), Vec3(20 + u(rng), 20 + u(rng), 20 + u(rng)), {"r", Category::kWall, ""});
  TriMesh o = make_box(Vec3(0.1, 0.2, 0.3), Vec3(0.4, 0.5, 0.6), {"r", Category::kObject, "obj"});
  for (std::size_t i = 0; i < o.vertices.size(); ++i) o.uvs.emplace_back(u(rng) / 3, u(rng) / 7);
  m.append(o);
  const auto bytes = encode_mesh(m);
  const TriMesh back = decode_mesh(bytes);
  ASSERT_EQ(back.vertices.size(), m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], m.vertices[i]);
  EXPECT_EQ(back.triangles, m.triangles);
  EXPECT_EQ(back.face_tag, m.face_tag);
  EXPECT_EQ(back.tags, m.tags);
  for (std::size_t i = 0; i < m.uvs.size(); ++i)
    if (std::isfinite(m.uvs[i].x())) {
      EXPECT_EQ(back.uvs[i], m.uvs[i]);
    } else {
      EXPECT_TRUE(std::isnan(back.uvs[i].x()));
    }
  EXPECT_EQ(encode_mesh(back), bytes);
}

TEST(MeshIo, RejectsTruncatedAndCorrupt) {
  auto bytes = encode_mesh(make_box(Vec3::Zero(), Vec3::Ones()));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_mesh(truncated), Error);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_mesh(bad), Error);
}

TEST(CameraId, Format) { EXPECT_EQ(camera_id("kitchen", 7), "kitchen/c07"); }

TEST(RunStage, MissingPriorArtifact) {
  const auto out = fresh_dir("worldmesh_stage_missing");
  const RunConfig cfg = small_config("one_room.json", out);
  for (const char* stage : {"structmesh", "objects", "cameras", "bootstrap", "synthesis", "export"}) {
    try {
      run_stage(cfg, stage);
      ADD_FAILURE() << stage;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kMissingPriorArtifact) << stage;
    }
  }
  EXPECT_THROW(run_stage(cfg, "paint"), Error);
}

TEST(RunStage, StructmeshAfterLayoutIsReproducible) {
  const auto out = fresh_dir("worldmesh_stage_struct");
  const RunConfig cfg = small_config("two_room.json", out);
  run_stage(cfg, "layout");
  const RunManifest a = run_stage(cfg, "structmesh");
  ASSERT_NE(a.stage("structmesh"), nullptr);
  EXPECT_TRUE(fs::exists(out / "structmesh" / "struct.glb"));
  EXPECT_TRUE(a.stage("structmesh")->artifacts.count("structmesh/struct.glb"));
  const RunManifest b = run_stage(cfg, "structmesh");
  EXPECT_EQ(a.stage("structmesh")->artifacts, b.stage("structmesh")->artifacts);
  EXPECT_EQ(a.to_json(), b.to_json());
  const TriMesh m = read_mesh(out / "structmesh" / "struct.wmesh");
  EXPECT_EQ(m, assemble_struct_mesh(load_layout(kLayouts / "two_room.json")));
}

TEST(RunStage, InvalidLayoutIsReported) {
  const auto out = fresh_dir("worldmesh_stage_badlayout");
  const auto bad = fresh_dir("worldmesh_bad_layout_src");
  fs::create_directories(bad);
  write_text(bad / "bad.json", "{\"version\": 3}");
  RunConfig cfg = small_config("one_room.json", out);
  cfg.layout.source = (bad / "bad.json").string();
  cfg.layout.max_attempts = 2;
  try {
    run_stage(cfg, "layout");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kExhaustedAttempts);
  }
  const RunManifest m = RunManifest::from_json(read_text(out / "manifest.json"));
  EXPECT_EQ(m.failed_stage, "layout");
  EXPECT_TRUE(fs::exists(out / "layout" / "validation.json"));
}

class GenerateOneRoom : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    out_ = new fs::path(fresh_dir("worldmesh_generate_a"));
    manifest_ = new RunManifest(run_generate(small_config("one_room.json", *out_)));
  }
  static void TearDownTestSuite() {
    delete manifest_;
    delete out_;
  }
  static fs::path* out_;
  static RunManifest* manifest_;
};
fs::path* GenerateOneRoom::out_ = nullptr;
RunManifest* GenerateOneRoom::manifest_ = nullptr;

TEST_F(GenerateOneRoom, ProducesAllArtifacts) {
  const auto& m = *manifest_;
  EXPECT_TRUE(m.failed_stage.empty());
  for (const auto& s : stage_names()) EXPECT_NE(m.stage(s), nullptr) << s;
  for (const char* f : {"export/scene.glb", "export/cloud.ply", "export/loss.json", "export/cameras.jsonl",
                        "export/atlas/charts.json", "export/images.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(*out_ / f)) << f;
  ASSERT_EQ(m.schedules.size(), 1u);
  EXPECT_EQ(m.schedules[0].order.size(), 26u);
  EXPECT_EQ(m.views.size(), 26u);
  for (const auto& v : m.views) {
    EXPECT_TRUE(v.accepted);
    EXPECT_EQ(v.attempts.size(), 1u);
    EXPECT_EQ(sha256_file(*out_ / v.image), v.image_sha256);
  }
  const PointCloud cloud = decode_ply(read_file(*out_ / "export" / "cloud.ply"));
  EXPECT_GT(cloud.size(), 100u);
  const auto loss = nlohmann::json::parse(read_text(*out_ / "export" / "loss.json"));
  EXPECT_EQ(loss.at("views").size(), 26u);
  EXPECT_DOUBLE_EQ(loss.at("mean").at("depth_l1").get<double>(), 0.0);
}

TEST_F(GenerateOneRoom, ViewsFollowScheduleAndStyleArgmax) {
  const auto& m = *manifest_;
  const auto& s = m.schedules[0];
  std::map<std::string, Quat> q;
  const std::string jsonl = read_text(*out_ / "cameras" / "cameras.jsonl");
  std::istringstream in(jsonl);
  for (std::string line; std::getline(in, line);)
    q[nlohmann::json::parse(line).at("id").get<std::string>()] = camera_from_json(line).orientation;
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    const auto& v = m.views[i];
    EXPECT_EQ(v.position, static_cast<int>(i));
    EXPECT_EQ(v.camera_id, s.order[i]);
    if (i == 0) {
      EXPECT_TRUE(v.style_ref.empty());
      continue;
    }
    double best = -1;
    for (std::size_t j = 0; j < i; ++j) best = std::max(best, quat_similarity(q[s.order[i]], q[s.order[j]]));
    EXPECT_NEAR(quat_similarity(q[s.order[i]], q[v.style_ref]), best, 1e-12) << v.camera_id;
  }
}

TEST_F(GenerateOneRoom, RerunIsByteIdentical) {
  const auto other = fresh_dir("worldmesh_generate_b");
  run_generate(small_config("one_room.json", other));
  EXPECT_EQ(tree(*out_), tree(other));
}

TEST_F(GenerateOneRoom, AtlasCoverageGrowsThroughStages) {
  const TextureAtlas boot = load_atlas(*out_ / "bootstrap" / "atlas");
  const TextureAtlas fin = load_atlas(*out_ / "export" / "atlas");
  EXPECT_GT(boot.coverage(), 0u);
  EXPECT_GT(fin.coverage(), boot.coverage());
}

TEST_F(GenerateOneRoom, ObjectsPlaced) {
  const auto report = nlohmann::json::parse(read_text(*out_ / "objects" / "placement.json"));
  ASSERT_EQ(report.size(), 1u);
  for (const auto& o : report[0].at("objects")) EXPECT_EQ(o.at("status"), "placed") << o.dump();
  const TriMesh geo = read_mesh(*out_ / "objects" / "geo.wmesh");
  std::size_t object_faces = 0;
  for (std::size_t f = 0; f < geo.triangle_count(); ++f) object_faces += geo.tag_of(f).category == Category::kObject;
  EXPECT_EQ(object_faces, 24u);
}

TEST(Generate, ConstantDepthExhaustsVerification) {
  const auto out = fresh_dir("worldmesh_generate_const");
  RunConfig cfg = small_config("one_room.json", out);
  cfg.depth.kind = "constant";
  try {
    run_generate(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVerificationExhausted);
  }
  const RunManifest m = RunManifest::from_json(read_text(out / "manifest.json"));
  EXPECT_EQ(m.failed_stage, "bootstrap");
  ASSERT_FALSE(m.views.empty());
  // Views without scaffold edges pass trivially; the run stops at the first one with edges.
  for (std::size_t i = 0; i + 1 < m.views.size(); ++i) EXPECT_EQ(m.views[i].attempts.back().result.mesh_edge_pixels, 0u);
  const ViewRecord& last = m.views.back();
  EXPECT_FALSE(last.accepted);
  ASSERT_EQ(last.attempts.size(), 4u);
  std::set<std::uint64_t> seeds;
  for (const auto& a : last.attempts) {
    EXPECT_FALSE(a.result.pass);
    seeds.insert(a.seed);
  }
  EXPECT_EQ(seeds.size(), 4u);
  EXPECT_FALSE(fs::exists(out / "bootstrap" / "atlas"));
}
