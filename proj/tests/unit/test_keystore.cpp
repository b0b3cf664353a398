#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "manifestd/error.hpp"
#include "manifestd/keystore.hpp"
#include "test_util.hpp"

using namespace manifestd;
using namespace manifestd::keys;

namespace {

ManifestDigest digest_of(std::uint64_t i) { return sha256("manifest-" + std::to_string(i)); }

class SchemeTest : public ::testing::TestWithParam<Scheme> {};

}  // namespace

TEST_P(SchemeTest, SignVerifyRoundTrip) {
    Keystore ks(GetParam());
    const auto h = ks.keygen("dev-k1");
    EXPECT_EQ(h.scheme, GetParam());
    EXPECT_FALSE(h.revoked);
    const auto d = digest_of(1);
    const Bytes sig = ks.sign(d, "dev-k1");
    EXPECT_TRUE(ks.verify(d, sig, "dev-k1").accepted());
    EXPECT_EQ(ks.verify(digest_of(2), sig, "dev-k1"), VerifyResult::rejected(RejectReason::signature_invalid));
}

TEST_P(SchemeTest, EveryBitFlipRejected) {
    Keystore ks(GetParam());
    ks.keygen("k");
    const auto d = digest_of(9);
    const Bytes sig = ks.sign(d, "k");
    for (std::size_t bit = 0; bit < sig.size() * 8; ++bit) {
        Bytes bad = sig;
        bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        ASSERT_EQ(ks.verify(d, bad, "k"), VerifyResult::rejected(RejectReason::signature_invalid)) << bit;
    }
}

TEST_P(SchemeTest, HonestAcceptedForgedRejected) {
    Keystore ks(GetParam());
    ks.keygen("a");
    ks.keygen("b");
    CounterRng rng(11);
    for (std::uint64_t i = 0; i < 2000; ++i) {
        const auto d = digest_of(i);
        const std::string key = i % 2 ? "a" : "b";
        const Bytes sig = ks.sign(d, key);
        ASSERT_TRUE(ks.verify(d, sig, key).accepted());
        // Same signature under the other key, a random signature, and a
        // truncated one.
        ASSERT_FALSE(ks.verify(d, sig, i % 2 ? "b" : "a").accepted());
        Bytes junk(sig.size());
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng.next_u64());
        ASSERT_FALSE(ks.verify(d, junk, key).accepted());
        ASSERT_FALSE(ks.verify(d, std::span(sig).first(sig.size() - 1), key).accepted());
    }
}

INSTANTIATE_TEST_SUITE_P(Schemes, SchemeTest, ::testing::Values(Scheme::ecdsa_p256, Scheme::ed25519),
                         [](const auto& info) { return info.param == Scheme::ecdsa_p256 ? "ecdsa" : "ed25519"; });

TEST(Keystore, DuplicateAndDistinctKeys) {
    Keystore ks;
    const auto a = ks.keygen("dev-k1");
    EXPECT_THROW(ks.keygen("dev-k1"), DuplicateKeyId);
    const auto b = ks.keygen("dev-k2");
    EXPECT_NE(a.public_key, b.public_key);
    EXPECT_EQ(ks.list().size(), 2u);
}

TEST(Keystore, UnknownAndRevoked) {
    Keystore ks;
    ks.keygen("dev-k1");
    ks.keygen("dev-k2");
    const auto d = digest_of(3);
    EXPECT_THROW(ks.sign(d, "nope"), UnknownKey);
    EXPECT_THROW(ks.revoke("nope"), UnknownKey);
    EXPECT_EQ(ks.verify(d, Bytes{1, 2, 3}, "nope"), VerifyResult::rejected(RejectReason::unknown_key));

    const Bytes sig = ks.sign(d, "dev-k2");
    ks.revoke("dev-k2");
    EXPECT_THROW(ks.sign(d, "dev-k2"), KeyRevoked);
    EXPECT_EQ(ks.verify(d, sig, "dev-k2"), VerifyResult::rejected(RejectReason::key_revoked));
    EXPECT_FALSE(ks.usable("dev-k2"));
    EXPECT_TRUE(ks.find("dev-k2")->revoked);
    EXPECT_NO_THROW(ks.revoke("dev-k2"));
    EXPECT_TRUE(ks.verify(d, ks.sign(d, "dev-k1"), "dev-k1").accepted());
}

TEST(Keystore, HandleExposesOnlyPublicMaterial) {
    Keystore ks;
    const KeyHandle h = ks.keygen("k");
    // Exactly the five public members; adding a private-key field would
    // break this binding.
    const auto& [id, scheme, pub, created, revoked] = h;
    EXPECT_EQ(id, "k");
    EXPECT_FALSE(pub.empty());
    (void)scheme;
    (void)created;
    (void)revoked;
}

TEST(Keystore, SaveLoadRoundTrip) {
    testutil::TempDir dir;
    const auto path = dir / "keys.json";
    Keystore ks;
    ks.set_kdf_iterations(1000);
    ks.keygen("dev-k1");
    ks.keygen("dev-k2", Scheme::ed25519, 1234);
    ks.revoke("dev-k2");
    ks.save(path, "pw");

    const std::string text = testutil::slurp(path);
    EXPECT_NE(text.find("dev-k1"), std::string::npos);
    EXPECT_NE(text.find("pbkdf2-sha256"), std::string::npos);

    Keystore back = Keystore::load(path, "pw");
    const auto d = digest_of(5);
    EXPECT_TRUE(ks.verify(d, back.sign(d, "dev-k1"), "dev-k1").accepted());
    EXPECT_TRUE(back.find("dev-k2")->revoked);
    EXPECT_EQ(back.find("dev-k2")->created_at, 1234u);
    EXPECT_EQ(back.find("dev-k2")->scheme, Scheme::ed25519);
    EXPECT_THROW(back.sign(d, "dev-k2"), KeyRevoked);

    EXPECT_THROW(Keystore::load(path, "wrong"), CryptoError);
    EXPECT_THROW(Keystore::load(dir / "missing.json", "pw"), StorageError);
}

TEST(Keystore, ReloadRevocationsFromAnotherProcess) {
    testutil::TempDir dir;
    const auto path = dir / "keys.json";
    Keystore writer;
    writer.set_kdf_iterations(1000);
    writer.keygen("dev-k1");
    writer.keygen("dev-k2");
    writer.save(path, "pw");
    Keystore reader = Keystore::load(path, "pw");
    EXPECT_TRUE(reader.usable("dev-k2"));
    writer.revoke("dev-k2");
    writer.save(path, "pw");
    reader.reload_revocations(path);
    EXPECT_FALSE(reader.usable("dev-k2"));
    EXPECT_TRUE(reader.usable("dev-k1"));
}

TEST(Keystore, NoSignSucceedsAfterRevokeReturns) {
    Keystore ks;
    ks.keygen("k");
    std::atomic<bool> revoked{false};
    std::atomic<bool> stop{false};
    std::atomic<int> late_successes{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t) {
        pool.emplace_back([&, t] {
            std::uint64_t i = 0;
            while (!stop.load()) {
                const bool after = revoked.load();
                try {
                    ks.sign(digest_of(t * 1000000 + i++), "k");
                    if (after) ++late_successes;
                } catch (const KeyRevoked&) {
                }
            }
        });
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ks.revoke("k");
    revoked.store(true);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    stop.store(true);
    for (auto& th : pool) th.join();
    EXPECT_EQ(late_successes.load(), 0);
}

TEST(Rotation, UniformTwoKeys) {
    const RotationPolicy rp({"dev-k1", "dev-k2"});
    CounterRng rng(2024);
    std::vector<int> counts(2, 0);
    const std::vector<bool> usable{true, true};
    for (int i = 0; i < 100000; ++i) ++counts[select_key_index(rp, usable, rng)];
    EXPECT_NEAR(counts[0] / 1e5, 0.5, 0.01);
    EXPECT_NEAR(counts[1] / 1e5, 0.5, 0.01);
}

TEST(Rotation, SkewedRegime) {
    const RotationPolicy rp({"dev-k1", "dev-k2"}, {0.3, -0.3});
    EXPECT_NEAR(rp.probabilities()[0], 0.8, 1e-12);
    CounterRng rng(99);
    int first = 0;
    const std::vector<bool> usable{true, true};
    for (int i = 0; i < 100000; ++i) first += select_key_index(rp, usable, rng) == 0;
    EXPECT_NEAR(first / 1e5, 0.8, 0.01);
}

TEST(Rotation, ConvergenceRateIsRootN) {
    const RotationPolicy rp({"a", "b", "c"}, {0.1, 0.0, -0.1});
    const auto probs = rp.probabilities();
    const std::vector<bool> usable{true, true, true};
    CounterRng rng(5);
    for (int n : {1000, 10000, 100000}) {
        std::vector<int> counts(3, 0);
        for (int i = 0; i < n; ++i) ++counts[select_key_index(rp, usable, rng)];
        for (int j = 0; j < 3; ++j) {
            const double se = std::sqrt(probs[j] * (1 - probs[j]) / n);
            ASSERT_LT(std::abs(counts[j] / static_cast<double>(n) - probs[j]), 4 * se) << n << " " << j;
        }
    }
}

TEST(Rotation, SingleKeyAndRevocation) {
    Keystore ks;
    ks.keygen("only");
    CounterRng rng(1);
    const RotationPolicy one({"only"});
    for (int i = 0; i < 100; ++i) EXPECT_EQ(select_key(one, ks, rng), "only");

    ks.keygen("other");
    const RotationPolicy two({"only", "other"}, {0.4, -0.4});
    ks.revoke("only");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(select_key(two, ks, rng), "other");
    ks.revoke("other");
    EXPECT_THROW(select_key(two, ks, rng), NoUsableKey);
}

TEST(Rotation, InvalidOffsets) {
    EXPECT_THROW(RotationPolicy({"a", "b"}, {0.1, 0.0}), DomainError);
    EXPECT_THROW(RotationPolicy({"a", "b"}, {0.6, -0.6}), DomainError);
    EXPECT_THROW(RotationPolicy({"a", "b"}, {0.0}), DomainError);
    EXPECT_THROW(RotationPolicy({}), DomainError);
}
