#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cubit/wah.hpp"
#include "support/reference.hpp"

using namespace cubit;

namespace {

WahBitvector from_bits(const ref::Bits& b) { return encode(std::span<const uint8_t>(b)); }

ref::Bits to_bits(const WahBitvector& v) { return decode(v); }

void check_canonical(const WahBitvector& v) {
  INFO("words=" << v.words().size() << " bit_len=" << v.bit_len());
  REQUIRE(ref::is_canonical(v.words(), v.bit_len()));
}

}  // namespace

TEST_CASE("encode: pinned small cases", "[wah]") {
  SECTION("empty") {
    auto v = from_bits({});
    CHECK(v.words().empty());
    CHECK(v.bit_len() == 0);
  }
  SECTION("62 zero bits become one fill word of run 2") {
    ref::Bits b(62, 0);
    auto v = from_bits(b);
    REQUIRE(v.words().size() == 1);
    CHECK(v.words()[0] == 0x8000'0002u);
    CHECK(v.bit_len() == 62);
  }
  SECTION("93 one bits become a value-1 fill of run 3") {
    ref::Bits b(93, 1);
    auto v = from_bits(b);
    REQUIRE(v.words().size() == 1);
    CHECK(v.words()[0] == (0x8000'0000u | 0x4000'0000u | 3u));
  }
  SECTION("random 93-bit pattern round-trips through the naive reference") {
    std::mt19937_64 rng(93);
    auto b = ref::random_bits(rng, 93, 0.3);
    auto v = from_bits(b);
    CHECK(to_bits(v) == b);
    uint64_t nlen = 0;
    auto nwords = ref::naive_encode(b, &nlen);
    CHECK(ref::naive_decode(nwords, nlen) == b);
    // Both encoders are canonical, so the word streams must agree exactly.
    CHECK(v.words() == nwords);
    CHECK(v.bit_len() == nlen);
  }
}

TEST_CASE("round-trip property across lengths and densities", "[wah]") {
  std::mt19937_64 rng(0xC0DEC);
  const double densities[] = {1e-5, 1e-3, 0.02, 0.2, 0.5, 0.9, 1.0};
  for (int iter = 0; iter < 60; ++iter) {
    uint64_t n = rng() % (iter < 50 ? 4096 : 1'000'000);
    double d = densities[rng() % std::size(densities)];
    auto b = ref::random_bits(rng, n, d);
    auto v = from_bits(b);
    REQUIRE(to_bits(v) == b);
    check_canonical(v);
    CHECK(v.words() == ref::naive_encode(b, nullptr));
  }
}

TEST_CASE("decode rejects malformed streams", "[wah]") {
  WahBitvector zero_run({make_fill(false, 0) | kFillFlag}, 31);
  CHECK_THROWS_AS(decode(zero_run), CodecError);
  WahBitvector short_stream({make_literal(5)}, 40);
  CHECK_THROWS_AS(decode(short_stream), CodecError);
  WahBitvector over_long({make_fill(false, 4)}, 31);
  CHECK_THROWS_AS(decode(over_long), CodecError);
}

TEST_CASE("get_bit and flip_bit", "[wah]") {
  SECTION("get_bit inside an all-ones fill") {
    ref::Bits b(93, 1);
    auto v = from_bits(b);
    CHECK(v.get_bit(50));
  }
  SECTION("get_bit out of range throws") {
    ref::Bits b(10, 0);
    auto v = from_bits(b);
    CHECK_THROWS_AS(v.get_bit(10), RangeError);
    CHECK_THROWS_AS(flip_bit(v, 10), RangeError);
  }
  SECTION("flip bit 0 of a 62-zero fill") {
    ref::Bits b(62, 0);
    auto v = flip_bit(from_bits(b), 0);
    auto bits = to_bits(v);
    int ones = 0;
    for (auto x : bits) ones += x;
    CHECK(ones == 1);
    CHECK(bits[0] == 1);
    check_canonical(v);
    REQUIRE(v.words().size() == 2);
    CHECK(v.words()[0] == 0x0000'0001u);
    CHECK(v.words()[1] == 0x8000'0001u);
  }
  SECTION("flip is an involution and perturbs exactly one bit") {
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 40; ++iter) {
      uint64_t n = 1 + rng() % 2000;
      auto b = ref::random_bits(rng, n, 0.2);
      auto v = from_bits(b);
      uint64_t i = rng() % n;
      auto f = flip_bit(v, i);
      check_canonical(f);
      auto fb = to_bits(f);
      for (uint64_t k = 0; k < n; ++k) {
        CHECK(fb[k] == (k == i ? b[k] ^ 1 : b[k]));
      }
      CHECK(flip_bit(f, i) == v);
    }
  }
  SECTION("batched flips match repeated single flips") {
    std::mt19937_64 rng(8);
    ref::Bits b = ref::random_bits(rng, 5000, 0.05);
    auto v = from_bits(b);
    std::vector<uint64_t> pos;
    for (uint64_t i = 0; i < 5000; i += 1 + rng() % 97) pos.push_back(i);
    auto batched = flip_bits_sorted(v, pos);
    auto expect = v;
    for (auto p : pos) expect = flip_bit(expect, p);
    CHECK(batched == expect);
  }
}

TEST_CASE("append_bit", "[wah]") {
  SECTION("append 1 to empty") {
    auto v = append_bit(WahBitvector{}, true);
    CHECK(v.bit_len() == 1);
    CHECK(to_bits(v) == ref::Bits{1});
  }
  SECTION("append 0 to a 62-zero fill, canonical at 93") {
    auto v = from_bits(ref::Bits(62, 0));
    v = append_bit(v, false);
    CHECK(v.bit_len() == 63);
    CHECK(v.words()[0] == 0x8000'0002u);  // the fill itself is unchanged
    CHECK(to_bits(v) == ref::Bits(63, 0));
    while (v.bit_len() < 93) v = append_bit(v, false);
    REQUIRE(v.words().size() == 1);
    CHECK(v.words()[0] == 0x8000'0003u);
  }
  SECTION("random appends equal naive rebuild") {
    std::mt19937_64 rng(11);
    ref::Bits b;
    WahBitvector v;
    for (int i = 0; i < 10'000; ++i) {
      uint8_t bit = rng() % 2;
      b.push_back(bit);
      v = append_bit(v, bit != 0);
    }
    CHECK(v == from_bits(b));
    check_canonical(v);
  }
}

TEST_CASE("extend_with_zeros matches concatenation", "[wah]") {
  std::mt19937_64 rng(12);
  for (int iter = 0; iter < 30; ++iter) {
    auto b = ref::random_bits(rng, rng() % 400, 0.3);
    uint64_t k = rng() % 200;
    auto v = extend_with_zeros(from_bits(b), k);
    ref::Bits expect = b;
    expect.resize(b.size() + k, 0);
    CHECK(to_bits(v) == expect);
    check_canonical(v);
  }
}

TEST_CASE("bitwise ops on compressed form", "[wah]") {
  std::mt19937_64 rng(13);
  SECTION("identities") {
    auto b = ref::random_bits(rng, 777, 0.3);
    auto v = from_bits(b);
    auto zeros = from_bits(ref::Bits(777, 0));
    CHECK(bitwise(BitOp::Xor, v, zeros) == v);
    CHECK(bitwise(BitOp::And, v, v) == v);
    CHECK(bitwise(BitOp::Xor, v, v) == zeros);
  }
  SECTION("length mismatch throws") {
    auto a = from_bits(ref::Bits(10, 0));
    auto b = from_bits(ref::Bits(11, 0));
    CHECK_THROWS_AS(bitwise(BitOp::Or, a, b), ShapeError);
  }
  SECTION("randomized equivalence with decoded op") {
    for (int iter = 0; iter < 40; ++iter) {
      uint64_t n = rng() % 3000;
      auto ba = ref::random_bits(rng, n, 0.1);
      auto bb = ref::random_bits(rng, n, 0.4);
      auto a = from_bits(ba), b = from_bits(bb);
      for (auto op : {BitOp::And, BitOp::Or, BitOp::Xor}) {
        auto r = bitwise(op, a, b);
        check_canonical(r);
        auto rb = to_bits(r);
        for (uint64_t i = 0; i < n; ++i) {
          uint8_t expect = op == BitOp::And   ? (ba[i] & bb[i])
                           : op == BitOp::Or ? (ba[i] | bb[i])
                                             : (ba[i] ^ bb[i]);
          REQUIRE(rb[i] == expect);
        }
      }
    }
  }
  SECTION("OR over 50 sparse vectors equals naive decoded OR") {
    uint64_t n = 20'000;
    ref::Bits acc_bits(n, 0);
    WahBitvector acc = from_bits(acc_bits);
    for (int i = 0; i < 50; ++i) {
      auto b = ref::random_bits(rng, n, 0.001);
      acc = bitwise(BitOp::Or, acc, from_bits(b));
      for (uint64_t k = 0; k < n; ++k) acc_bits[k] |= b[k];
    }
    CHECK(to_bits(acc) == acc_bits);
  }
}

TEST_CASE("count_ones and density", "[wah]") {
  CHECK(from_bits(ref::Bits(100, 0)).count_ones() == 0);
  CHECK(from_bits(ref::Bits(100, 0)).density() == 0.0);
  CHECK(WahBitvector{}.density() == 0.0);
  auto ones62 = from_bits(ref::Bits(62, 1));
  CHECK(ones62.count_ones() == 62);
  CHECK(ones62.density() == 1.0);
  std::mt19937_64 rng(14);
  for (int iter = 0; iter < 20; ++iter) {
    auto b = ref::random_bits(rng, rng() % 5000, 0.17);
    uint64_t expect = 0;
    for (auto x : b) expect += x;
    CHECK(from_bits(b).count_ones() == expect);
  }
}

TEST_CASE("decode_words and encode_words agree with byte decode", "[wah]") {
  std::mt19937_64 rng(15);
  for (int iter = 0; iter < 30; ++iter) {
    auto b = ref::random_bits(rng, rng() % 4000, 0.3);
    auto v = from_bits(b);
    auto words = decode_words(v);
    for (uint64_t i = 0; i < b.size(); ++i) {
      REQUIRE(((words[i >> 6] >> (i & 63)) & 1) == b[i]);
    }
    CHECK(encode_words(words, b.size()) == v);
  }
}

TEST_CASE("serialization is little-endian and round-trips", "[wah]") {
  auto v = from_bits(ref::Bits(62, 0));
  auto bytes = v.serialize();
  std::vector<uint8_t> expect = {62, 0, 0, 0, 0, 0, 0, 0, 0x02, 0x00, 0x00, 0x80};
  CHECK(bytes == expect);
  CHECK(WahBitvector::deserialize(bytes) == v);

  std::mt19937_64 rng(16);
  auto b = ref::random_bits(rng, 12345, 0.2);
  auto w = from_bits(b);
  CHECK(WahBitvector::deserialize(w.serialize()) == w);

  std::vector<uint8_t> bad = {1, 2, 3};
  CHECK_THROWS_AS(WahBitvector::deserialize(bad), CodecError);
}
