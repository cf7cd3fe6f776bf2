#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "motionduet/errors.hpp"
#include "motionduet/motion_io.hpp"

namespace io = motionduet::io;
namespace sd = motionduet::synthdata;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("motionduet_io_" + name); }

sd::MotionSequence sampleMotion() {
  sd::SynthSpec spec;
  spec.samplesPerClass = 1;
  spec.frames = 10;
  spec.dims = 3;
  return sd::synthesizeMotion(spec)[5];
}

}  // namespace

TEST(MotionIo, RoundTripAtFloatPrecision) {
  const auto m = sampleMotion();
  io::writeMotionFile(tmp("rt.bin"), m);
  const auto back = io::readMotionFile(tmp("rt.bin"));
  EXPECT_EQ(back.label, 5);
  EXPECT_DOUBLE_EQ(back.fps, m.fps);
  ASSERT_EQ(back.values.shape(), m.values.shape());
  for (std::size_t i = 0; i < m.values.size(); ++i)
    EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(m.values[i])));
}

TEST(MotionIo, TruncatedPayloadNamesByteOffset) {
  const auto m = sampleMotion();
  io::writeMotionFile(tmp("trunc.bin"), m);
  const auto size = fs::file_size(tmp("trunc.bin"));
  fs::resize_file(tmp("trunc.bin"), size - 6);
  try {
    io::readMotionFile(tmp("trunc.bin"));
    FAIL();
  } catch (const motionduet::FormatError& e) {
    const std::string msg = e.what();
    const std::size_t offset = size - 30 * 4;
    EXPECT_NE(msg.find("byte offset " + std::to_string(offset)), std::string::npos) << msg;
  }
}

TEST(MotionIo, MalformedHeaderAndMissingFile) {
  std::ofstream(tmp("bad.bin")) << "{\"frames\": 2,\n";
  EXPECT_THROW(io::readMotionFile(tmp("bad.bin")), motionduet::FormatError);
  std::ofstream(tmp("nohdr.bin")) << "no newline";
  EXPECT_THROW(io::readMotionFile(tmp("nohdr.bin")), motionduet::FormatError);
  EXPECT_THROW(io::readMotionFile(tmp("does_not_exist.bin")), motionduet::FormatError);
}

TEST(MotionIo, CsvReader) {
  std::ofstream(tmp("m.csv")) << "a,b\n1,2\n3.5,-4\n";
  const auto m = io::readMotionCsv(tmp("m.csv"));
  ASSERT_EQ(m.frames(), 2u);
  ASSERT_EQ(m.dims(), 2u);
  EXPECT_DOUBLE_EQ(m.values(1, 0), 3.5);
  EXPECT_DOUBLE_EQ(m.values(1, 1), -4.0);

  std::ofstream(tmp("ragged.csv")) << "a,b\n1,2\n3\n";
  try {
    io::readMotionCsv(tmp("ragged.csv"));
    FAIL();
  } catch (const motionduet::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::ofstream(tmp("nan.csv")) << "a\nfoo\n";
  EXPECT_THROW(io::readMotionCsv(tmp("nan.csv")), motionduet::FormatError);
  std::ofstream(tmp("empty.csv")) << "a,b\n";
  EXPECT_THROW(io::readMotionCsv(tmp("empty.csv")), motionduet::FormatError);
}
