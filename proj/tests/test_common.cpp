// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "distillab/common.hpp"

using namespace distillab;

TEST_CASE("crc32 matches the standard check value", "[common]") {
  const char* msg = "123456789";
  REQUIRE(crc32_bytes(msg, 9) == 0xcbf43926u);
  REQUIRE(crc32_bytes(msg, 0) == 0u);
}

TEST_CASE("crc32 detects single-byte changes", "[common]") {
  std::vector<unsigned char> data(64);
  for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<unsigned char>(i * 7);
  const uint32_t base = crc32(data);
  data[13] ^= 0x01;
  REQUIRE(crc32(data) != base);
}

TEST_CASE("fnv1a is deterministic and order-sensitive", "[common]") {
  Fnv1a a, b, c;
  a.update_str("xy");
  b.update_str("xy");
  c.update_str("yx");
  REQUIRE(a.digest() == b.digest());
  REQUIRE(a.digest() != c.digest());

  Fnv1a d, e;
  d.update_f64(1.5);
  d.update_i64(-7);
  e.update_i64(-7);
  e.update_f64(1.5);
  REQUIRE(d.digest() != e.digest());
}

TEST_CASE("hex64 round-trips", "[common]") {
  for (uint64_t v : {0ull, 1ull, 0xdeadbeefcafebabeull, 0xffffffffffffffffull}) {
    REQUIRE(parse_hex64(hex64(v)) == v);
  }
  REQUIRE(hex64(0x1234abcdull) == "0x000000001234abcd");
  REQUIRE(parse_hex64("FFff") == 0xffffull);
  REQUIRE_THROWS_AS(parse_hex64("0xg1"), DataError);
}
