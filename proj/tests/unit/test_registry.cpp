#include "helpers.hpp"

#include <doctest.h>
#include <tlsaudit/registry.hpp>

using namespace tlsaudit;
using namespace tlsaudit::registry;

TEST_CASE("bundled registry loads")
{
    const auto& r = default_registry();
    CHECK(r.size() >= 100);
    CHECK(r.version() == "2014.1");
    CHECK(r.lookup_by_name("DES-CBC3-SHA") != nullptr);
    CHECK(r.lookup_by_name("ECDHE-RSA-AES128-GCM-SHA256") != nullptr);
}

TEST_CASE("lookup examples")
{
    const auto& r = default_registry();
    const auto* des3 = r.lookup_by_name("DES-CBC3-SHA");
    REQUIRE(des3);
    CHECK(des3->kx == "RSA");
    CHECK(des3->au == "RSA");
    CHECK(des3->enc == "3DES");
    CHECK(des3->enc_bits == 168);
    CHECK(des3->mac == "SHA1");
    CHECK(des3->min_version == ProtocolVersion::SSL3);

    const auto* ec = r.lookup_by_name("ECDHE-ECDSA-DES-CBC3-SHA");
    REQUIRE(ec);
    CHECK(ec->kx == "ECDHE");
    CHECK(ec->au == "ECDSA");
    CHECK(ec->enc == "3DES");
    CHECK(ec->mac == "SHA1");

    CHECK(r.lookup_by_name("NO-SUCH-CIPHER") == nullptr);
    CHECK(r.lookup_by_id(0x000a) == des3);
    CHECK(r.lookup_by_id(0xffff) == nullptr);
    // 0x0000 is not shipped
    CHECK(r.lookup_by_id(0x0000) == nullptr);
}

TEST_CASE("classification examples")
{
    const auto& r = default_registry();
    auto f = classify(*r.lookup_by_name("ECDHE-RSA-AES128-GCM-SHA256"));
    CHECK(f.pfs);
    CHECK(f.aead);
    CHECK(f.strength_class == StrengthClass::HIGH);

    f = classify(*r.lookup_by_name("DES-CBC3-SHA"));
    CHECK_FALSE(f.pfs);
    CHECK_FALSE(f.aead);
    CHECK(f.strength_class == StrengthClass::HIGH);

    f = classify(*r.lookup_by_name("NULL-SHA"));
    CHECK(f.null_cipher);
    CHECK(f.strength_class == StrengthClass::NULL_CLASS);

    f = classify(*r.lookup_by_name("RC4-MD5"));
    CHECK(f.weak_hash);
    f = classify(*r.lookup_by_name("ADH-AES128-SHA"));
    CHECK(f.anonymous);
    CHECK(f.pfs);
    f = classify(*r.lookup_by_name("EXP-RC4-MD5"));
    CHECK(f.export_grade);
    CHECK(f.strength_class == StrengthClass::LOW);
}

TEST_CASE("strength thresholds")
{
    CHECK(strength_for_bits(0) == StrengthClass::NULL_CLASS);
    CHECK(strength_for_bits(1) == StrengthClass::LOW);
    CHECK(strength_for_bits(111) == StrengthClass::LOW);
    CHECK(strength_for_bits(112) == StrengthClass::MEDIUM);
    CHECK(strength_for_bits(127) == StrengthClass::MEDIUM);
    CHECK(strength_for_bits(128) == StrengthClass::HIGH);
    CHECK(strength_for_bits(256) == StrengthClass::HIGH);
}

TEST_CASE("row invariants and round trips")
{
    const auto& r = default_registry();
    for (const auto& c : r.suites())
    {
        CAPTURE(c.name);
        CHECK((c.enc == "NULL") == (c.enc_bits == 0));
        if (c.mode == CipherMode::GCM)
            CHECK(c.min_version == ProtocolVersion::TLS1_2);
        CHECK(r.lookup_by_name(c.name) == &c);
        CHECK(r.lookup_by_id(c.id) == &c);
        CHECK(classify(c) == classify(c));
        auto f = classify(c);
        CHECK(f.pfs == (c.kx == "DHE" || c.kx == "ECDHE"));
        CHECK(f.export_grade == (c.enc_bits < 56));
    }
}

TEST_CASE("listing lines reproduce exactly")
{
    const auto& r = default_registry();
    auto want = testutil::lines(testutil::slurp(testutil::fixture("ciphers_v_listing.txt")));
    REQUIRE(want.size() == 10);
    for (const auto& line : want)
    {
        auto name = line.substr(0, line.find(' '));
        const auto* c = r.lookup_by_name(name);
        REQUIRE_MESSAGE(c, name);
        CHECK(describe(*c) == line);
    }
}

TEST_CASE("load errors")
{
    CHECK(load_registry("").empty());
    CHECK(load_registry("# only a comment\n\n").empty());

    const std::string row_a = "000a\tDES-CBC3-SHA\tRSA\tRSA\t3DES\t168\tCBC\tSHA1\tSSL3\n";
    const std::string row_b = "000a\tOTHER\tRSA\tRSA\t3DES\t168\tCBC\tSHA1\tSSL3\n";
    try
    {
        load_registry(row_a + row_b);
        FAIL("expected LoadError");
    }
    catch (const LoadError& e)
    {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(load_registry(row_a + row_a), LoadError);

    CHECK_THROWS_AS(load_registry("000A\tX\tRSA\tRSA\t3DES\t168\tCBC\tSHA1\tSSL3\n"), LoadError);
    CHECK_THROWS_AS(load_registry("000a\tX\tRSA\tRSA\t3DES\n"), LoadError);
    CHECK_THROWS_AS(load_registry("000a\tX\tRSA\tRSA\t3DES\tabc\tCBC\tSHA1\tSSL3\n"), LoadError);
    CHECK_THROWS_AS(load_registry("000a\tX\tRSA\tRSA\tNULL\t128\tNONE\tSHA1\tSSL3\n"), LoadError);
    CHECK_THROWS_AS(load_registry("009c\tX\tRSA\tRSA\tAES\t128\tGCM\tAEAD\tSSL3\n"), LoadError);
    CHECK_THROWS_AS(load_registry("000a\tX\tRSA\tRSA\t3DES\t168\tXTS\tSHA1\tSSL3\n"), LoadError);

    auto r = load_registry("# registry_version test\r\n" + row_a);
    CHECK(r.version() == "test");
    CHECK(r.size() == 1);
}
