#include <doctest.h>

#include "imsound/io.hpp"

#include <filesystem>

using namespace imsound;

TEST_CASE("pgm and ppm round trips") {
  Canvas g(Shape{1, 2, 3}, (Eigen::VectorXd(6) << 0.0, 0.2, 0.5, 0.7, 1.0, 1.3).finished());
  const auto bytes = encode_pnm(g);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + long(header.size())) == header);
  CHECK(bytes[header.size() + 1] == 51);   // lround(0.2 * 255)
  CHECK(bytes[header.size() + 2] == 128);  // lround(127.5)
  CHECK(bytes[header.size() + 5] == 255);  // clamped
  const Canvas back = decode_pnm(bytes);
  CHECK(back.shape() == g.shape());
  CHECK(std::abs(back.values()[3] - 179.0 / 255.0) < 1e-15);

  Rng rng(2);
  Canvas c(Shape{3, 4, 5});
  for (Eigen::Index i = 0; i < c.size(); ++i) c.values()[i] = rng.uniform();
  const Canvas cb = decode_pnm(encode_pnm(c));
  CHECK(cb.shape() == c.shape());
  CHECK((cb.values() - c.values()).cwiseAbs().maxCoeff() <= 0.5 / 255 + 1e-12);
  CHECK(encode_pnm(cb) == encode_pnm(c));

  CHECK_THROWS_AS(encode_pnm(Canvas(Shape{2, 2, 2})), ShapeError);
  CHECK_THROWS_AS(decode_pnm({'P', '2', '\n'}), FormatError);
  auto trunc = bytes;
  trunc.pop_back();
  CHECK_THROWS_AS(decode_pnm(trunc), FormatError);
}

TEST_CASE("pnm header comments are skipped") {
  const std::string s = "P5\n# made by hand\n2 1\n255\n";
  std::vector<unsigned char> b(s.begin(), s.end());
  b.push_back(0);
  b.push_back(255);
  const Canvas c = decode_pnm(b);
  CHECK(c.width() == 2);
  CHECK(c.values()[1] == 1.0);
}

TEST_CASE("files and digests") {
  const auto dir = std::filesystem::temp_directory_path() / "imsound_io_test";
  std::filesystem::create_directories(dir);
  write_bytes(dir / "x.bin", {1, 2, 3});
  CHECK(read_bytes(dir / "x.bin") == std::vector<unsigned char>{1, 2, 3});
  CHECK_THROWS(read_bytes(dir / "missing.bin"));
  std::filesystem::remove_all(dir);

  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64({'a'}) == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("key-value configs") {
  const auto kv = KeyValues::parse("# comment\n gamma_a = 7.5 \n\nsteps=50\nseed=18446744073709551615\n");
  CHECK(kv.get_double("gamma_a", 0) == 7.5);
  CHECK(kv.get_int("steps", 0) == 50);
  CHECK(kv.get_u64("seed", 0) == 18446744073709551615ULL);
  CHECK(kv.get_double("absent", 3.0) == 3.0);
  CHECK(kv.unknown_keys({"gamma_a", "steps"}) == std::vector<std::string>{"seed"});
  CHECK_THROWS_AS(KeyValues::parse("novalue\n"), FormatError);
  CHECK_THROWS_AS(KeyValues::parse("x=abc").get_double("x", 0), ParameterError);
  CHECK_THROWS_AS(KeyValues::parse("x=1.5").get_int("x", 0), ParameterError);

  KeyValues out;
  out.set("b", 0.1);
  out.set("a", 3);
  CHECK(out.serialize() == "a=3\nb=0.1\n");
  CHECK(format_double(0.1 + 0.2) == "0.30000000000000004");
  CHECK(format_double(10.0) == "10");
}

TEST_CASE("tables") {
  Table t{{"name", "value"}, {{"alpha", "1"}, {"b", "22"}}};
  CHECK(t.to_csv() == "name,value\nalpha,1\nb,22\n");
  const std::string text = t.to_text();
  CHECK(text.find("alpha") != std::string::npos);
  CHECK(text.find("name ") == 0);
}
