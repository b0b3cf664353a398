#include <gtest/gtest.h>

#include "manifestd/error.hpp"
#include "manifestd/pipeline.hpp"
#include "test_util.hpp"

using namespace manifestd;
using namespace manifestd::pipeline;

namespace {

constexpr std::uint64_t kNow = 1700000000000ULL;

Manifest request(std::uint64_t ts = kNow - 500) {
    return Manifest({{"query", "q-1"}, {"temperature", 0.5}}, {{"context_id", "ctx-00ff00ff"}}, ts, "search");
}

policy::PolicySet fresh_only() {
    return policy::PolicySet({{"fresh", policy::FreshnessWindow{}, policy::Severity::block}}, 60000);
}

struct Fixture : ::testing::Test {
    keys::Keystore ks;
    tlog::TransparencyLog log;
    void SetUp() override {
        ks.keygen("dev-k1");
        ks.keygen("dev-k2");
    }
};

}  // namespace

TEST_F(Fixture, SignsCompliantManifest) {
    const auto r = create_and_sign(request(), fresh_only(), ks, "dev-k1", kNow);
    ASSERT_TRUE(r.signed_manifest);
    EXPECT_TRUE(r.report.passed);
    EXPECT_EQ(r.signed_manifest->digest, digest(request()));
    EXPECT_TRUE(verify_signed(*r.signed_manifest, ks).accepted());
}

TEST_F(Fixture, BlockedManifestIsNeverSigned) {
    const auto r = create_and_sign(request(kNow - 60001), fresh_only(), ks, "dev-k1", kNow);
    EXPECT_FALSE(r.signed_manifest);
    EXPECT_FALSE(r.report.passed);
    EXPECT_EQ(rejection_line(r.report), "rejected stage=policy severity=block rule=fresh:freshness-window:block");
}

TEST_F(Fixture, KeyFailuresThrow) {
    EXPECT_THROW(create_and_sign(request(), fresh_only(), ks, "ghost", kNow), UnknownKey);
    ks.revoke("dev-k2");
    EXPECT_THROW(create_and_sign(request(), fresh_only(), ks, "dev-k2", kNow), KeyRevoked);
}

TEST_F(Fixture, AcceptedManifestsAreLogged) {
    for (int i = 0; i < 10; ++i) {
        const auto r = create_and_sign(request(kNow - i), fresh_only(), ks, i % 2 ? "dev-k1" : "dev-k2", kNow);
        const auto lr = verify_and_log(*r.signed_manifest, ks, log, kNow + i);
        ASSERT_TRUE(lr.verdict.accepted());
        ASSERT_TRUE(lr.receipt);
        EXPECT_EQ(lr.receipt->index, static_cast<std::uint64_t>(i));
        EXPECT_EQ(log.entry(i).manifest_digest, r.signed_manifest->digest);
    }
    EXPECT_EQ(log.size(), 10u);
}

TEST_F(Fixture, RejectedManifestsAreNotLogged) {
    auto sm = *create_and_sign(request(), fresh_only(), ks, "dev-k1", kNow).signed_manifest;

    auto flipped = sm;
    flipped.signature[3] ^= 0x10;
    auto lr = verify_and_log(flipped, ks, log, kNow);
    EXPECT_EQ(lr.verdict, keys::VerifyResult::rejected(keys::RejectReason::signature_invalid));
    EXPECT_FALSE(lr.receipt);

    auto swapped = sm;
    swapped.manifest = request(kNow - 7);
    EXPECT_EQ(verify_and_log(swapped, ks, log, kNow).verdict.reject, keys::RejectReason::signature_invalid);

    auto redigested = swapped;
    redigested.digest = digest(swapped.manifest);
    EXPECT_EQ(verify_and_log(redigested, ks, log, kNow).verdict.reject, keys::RejectReason::signature_invalid);

    auto other_key = sm;
    other_key.key_id = "dev-k2";
    EXPECT_EQ(verify_and_log(other_key, ks, log, kNow).verdict.reject, keys::RejectReason::signature_invalid);

    ks.revoke("dev-k1");
    lr = verify_and_log(sm, ks, log, kNow);
    EXPECT_EQ(lr.verdict.reject, keys::RejectReason::key_revoked);
    EXPECT_EQ(rejection_line(lr.verdict), "rejected stage=verify reason=key-revoked");
    EXPECT_EQ(log.size(), 0u);
}

TEST_F(Fixture, SignedFileRoundTrip) {
    testutil::TempDir dir;
    const auto a = *create_and_sign(request(), fresh_only(), ks, "dev-k1", kNow).signed_manifest;
    const auto b = *create_and_sign(request(kNow - 3), fresh_only(), ks, "dev-k2", kNow).signed_manifest;
    testutil::spit(dir / "s.ndjson", serialize_signed(a) + "\n" + serialize_signed(b) + "\n");
    const auto back = read_signed_file(dir / "s.ndjson");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].manifest, a.manifest);
    EXPECT_EQ(back[1].signature, b.signature);
    EXPECT_EQ(back[1].key_id, "dev-k2");
    EXPECT_TRUE(verify_signed(back[0], ks).accepted());

    testutil::spit(dir / "bad.ndjson", serialize_signed(a) + "\n{\"manifest\":1}\n");
    try {
        read_signed_file(dir / "bad.ndjson");
        FAIL() << "expected EncodingError";
    } catch (const EncodingError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.ndjson:2:"), std::string::npos);
    }
    EXPECT_THROW(parse_signed("[]"), EncodingError);
    EXPECT_THROW(read_signed_file(dir / "absent"), StorageError);
}
