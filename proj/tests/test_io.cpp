#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "rmf/image.hpp"
#include "rmf/tensor_io.hpp"
#include "scenes.hpp"

namespace rmf {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rmf_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image byte_image(int w, int h, std::uint64_t seed) {
  Image img(w, h);
  std::mt19937_64 rng(seed);
  for (double& v : img.data) v = static_cast<double>(rng() % 256) / 255.0;
  return img;
}

TEST(ImageIo, ToByteRoundsAndClamps) {
  EXPECT_EQ(to_byte(-0.5), 0);
  EXPECT_EQ(to_byte(0.0), 0);
  EXPECT_EQ(to_byte(0.5), 128);
  EXPECT_EQ(to_byte(1.0), 255);
  EXPECT_EQ(to_byte(3.0), 255);
  EXPECT_EQ(to_byte(1.0 / 255.0), 1);
}

TEST(ImageIo, PpmAndPngRoundTrip) {
  const fs::path dir = scratch("images");
  const Image a = byte_image(13, 7, 1);
  for (const char* name : {"a.ppm", "a.png"}) {
    write_image(dir / name, a);
    const Image b = read_image(dir / name);
    ASSERT_EQ(b.width, 13);
    ASSERT_EQ(b.height, 7);
    EXPECT_EQ(b.data, a.data) << name;
  }
}

TEST(ImageIo, PpmIsBinaryP6) {
  const fs::path dir = scratch("p6");
  Image a(2, 1);
  a.set(0, 0, Vec3(1, 0, 0));
  a.set(1, 0, Vec3(0, 0.5, 1));
  write_ppm(dir / "x.ppm", a);
  std::ifstream in(dir / "x.ppm", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes, std::string("P6\n2 1\n255\n\xff\x00\x00\x00\x80\xff", 17));
}

TEST(ImageIo, ErrorsAreIoErrors) {
  const fs::path dir = scratch("errors");
  EXPECT_THROW(read_image(dir / "absent.ppm"), IoError);
  EXPECT_THROW(write_image(dir / "x.bmp", Image(2, 2)), IoError);
  std::ofstream(dir / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
  EXPECT_THROW(read_ppm(dir / "bad.ppm"), IoError);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(read_png(dir / "bad.png"), IoError);
}

TEST(TensorIo, RoundTripWithDescriptor) {
  const fs::path dir = scratch("tensor");
  Tensor t;
  t.shape = {2, 3};
  t.data = {1.5, -2.0, 3.25, 1e-300, -0.0, 7.0};
  t.meta = {{"kind", "test"}};
  write_tensor(dir / "t.bin", t);
  EXPECT_TRUE(fs::exists(dir / "t.json"));
  EXPECT_EQ(fs::file_size(dir / "t.bin"), 48u);
  const Tensor u = read_tensor(dir / "t.bin");
  EXPECT_EQ(u.shape, t.shape);
  EXPECT_EQ(u.data, t.data);
  EXPECT_EQ(u.meta, t.meta);
}

TEST(TensorIo, MalformedFilesThrow) {
  const fs::path dir = scratch("malformed");
  Tensor t;
  t.shape = {4};
  t.data = {1, 2, 3, 4};
  write_tensor(dir / "t.bin", t);
  fs::resize_file(dir / "t.bin", 24);
  EXPECT_THROW(read_tensor(dir / "t.bin"), IoError);
  EXPECT_THROW(read_tensor(dir / "absent.bin"), IoError);
  write_tensor(dir / "t.bin", t);
  std::ofstream(dir / "t.json") << "{\"dtype\": \"float32\", \"shape\": [4]}";
  EXPECT_THROW(read_tensor(dir / "t.bin"), IoError);
  t.data.pop_back();
  EXPECT_THROW(write_tensor(dir / "u.bin", t), std::invalid_argument);
}

TEST(TensorIo, ModelObjectsRoundTrip) {
  const fs::path dir = scratch("models");
  const Mlp net = testing::random_decoder(8, 5);
  save_mlp(dir / "mlp.bin", net);
  const Mlp back = load_mlp(dir / "mlp.bin");
  Feature x = Feature::LinSpaced(8, -1.0, 1.0);
  EXPECT_EQ(back.forward(x), net.forward(x));

  const CoarseModel model = testing::sphere_model();
  const LatentCode code = model.generator.sample_code(3);
  save_latent(dir / "code.bin", code);
  EXPECT_EQ(load_latent(dir / "code.bin").w, code.w);

  const Camera cam = testing::front_camera();
  DetailVoxel v = DetailVoxel::zeros(cam, 1.5, 3, 4, 5, 2);
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = 0.01 * static_cast<double>(i);
  save_voxel(dir / "voxel.bin", v);
  const DetailVoxel w = load_voxel(dir / "voxel.bin", cam, 1.5);
  EXPECT_EQ(w.height, 3);
  EXPECT_EQ(w.width, 4);
  EXPECT_EQ(w.depth, 5);
  EXPECT_EQ(w.channels, 2);
  EXPECT_EQ(w.data, v.data);
  EXPECT_EQ(w.camera, cam);

  const ConvStack s = ConvStack::identity(3);
  save_conv_stack(dir / "conv.bin", s);
  const ConvStack t = load_conv_stack(dir / "conv.bin");
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(t.layers[i].weight, s.layers[i].weight);
    EXPECT_EQ(t.layers[i].bias, s.layers[i].bias);
  }
  EXPECT_THROW(load_latent(dir / "conv.bin"), IoError);
}

}  // namespace
}  // namespace rmf
