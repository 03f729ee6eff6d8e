#include "doctest.h"

#include "shapes.hpp"
#include "softshadow/errors.hpp"
#include "softshadow/mesh.hpp"

#include <fstream>
#include <random>
#include <sstream>

using namespace softshadow;
using softshadow::testing::TempDir;

namespace {

Mesh random_soup(int count, std::uint32_t seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> pos(-0.5f, 0.5f);
    std::uniform_real_distribution<float> jitter(-0.15f, 0.15f);
    std::vector<Vec3> v;
    std::vector<Triangle> t;
    for (int i = 0; i < count; ++i) {
        const Vec3 c(pos(rng), pos(rng), pos(rng));
        const auto base = static_cast<std::uint32_t>(v.size());
        for (int k = 0; k < 3; ++k) {
            v.push_back(c + Vec3(jitter(rng), jitter(rng), jitter(rng)));
        }
        t.push_back({base, base + 1, base + 2});
    }
    return Mesh(std::move(v), std::move(t));
}

} // namespace

TEST_CASE("load_mesh normalizes a [0,10] cube into the canonical box")
{
    TempDir dir("mesh");
    std::ostringstream obj;
    for (int i = 0; i < 8; ++i) {
        obj << "v " << (i & 1 ? 10 : 0) << ' ' << (i & 2 ? 10 : 0) << ' ' << (i & 4 ? 10 : 0) << '\n';
    }
    obj << "f 1 2 4 3\nf 5 7 8 6\nf 1 5 6 2\nf 3 4 8 7\nf 1 3 7 5\nf 2 6 8 4\n";
    {
        std::ofstream out(dir.path() / "cube.obj");
        out << obj.str();
    }
    const Mesh m = load_mesh(dir.path() / "cube.obj");
    CHECK(m.triangle_count() == 12);
    for (int a = 0; a < 3; ++a) {
        CHECK(m.bounds().lo[a] == doctest::Approx(-0.5f));
        CHECK(m.bounds().hi[a] == doctest::Approx(0.5f));
    }
}

TEST_CASE("single triangle normalizes around the origin")
{
    const Mesh m = normalize(parse_obj("v 0 0 0\nv 4 0 0\nv 0 2 0\nf 1 2 3\n"));
    CHECK(m.triangle_count() == 1);
    const Vec3 center = 0.5f * (m.bounds().lo + m.bounds().hi);
    CHECK(center.norm() < 1e-6f);
    CHECK((m.bounds().hi - m.bounds().lo).maxCoeff() == doctest::Approx(1.0f));
}

TEST_CASE("mesh without faces is degenerate")
{
    TempDir dir("mesh");
    {
        std::ofstream out(dir.path() / "empty.obj");
        out << "v 0 0 0\nv 1 0 0\n";
    }
    CHECK_THROWS_AS(load_mesh(dir.path() / "empty.obj"), DegenerateInputError);
    CHECK_THROWS_AS(normalize(Mesh()), DegenerateInputError);
}

TEST_CASE("obj parsing details")
{
    SUBCASE("negative indices and slash tokens")
    {
        const Mesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3/1/1 -2//1 -1\n");
        REQUIRE(m.triangle_count() == 1);
        CHECK(m.triangles()[0] == Triangle{0, 1, 2});
    }
    SUBCASE("polygons are fan triangulated")
    {
        const Mesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
        CHECK(m.triangle_count() == 2);
    }
    SUBCASE("errors carry source and line")
    {
        try {
            parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 9\n", "bad.obj");
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("bad.obj:3") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_obj("v 0 zero 0\n"), FormatError);
        CHECK_THROWS_AS(parse_obj("v 0 0 0\nf 1 1\n"), FormatError);
    }
}

TEST_CASE("normalize is idempotent")
{
    for (const Mesh& m : {testing::chair(), testing::table(), random_soup(50, 4)}) {
        const Mesh once = normalize(m);
        const Mesh twice = normalize(once);
        REQUIRE(once.vertices().size() == twice.vertices().size());
        for (std::size_t i = 0; i < once.vertices().size(); ++i) {
            CHECK((once.vertices()[i] - twice.vertices()[i]).norm() < 1e-6f);
        }
    }
}

TEST_CASE("bvh agrees with brute force on random rays")
{
    const Mesh m = random_soup(500, 11);
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> pos(-1.0f, 1.0f);
    int hits = 0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 origin(pos(rng), pos(rng), pos(rng));
        Vec3 target(0.5f * pos(rng), 0.5f * pos(rng), 0.5f * pos(rng));
        Ray ray{origin, (target - origin).normalized()};
        const auto fast = m.intersect(ray);
        const auto slow = m.intersect_brute_force(ray);
        REQUIRE(fast.has_value() == slow.has_value());
        CHECK(m.occluded(ray) == slow.has_value());
        if (fast) {
            ++hits;
            CHECK(std::abs(fast->t - slow->t) <= 1e-6f);
            CHECK(fast->triangle == slow->triangle);
        }
    }
    CHECK(hits > 100);
}

TEST_CASE("rays respect tmin and tmax")
{
    const Mesh m = testing::box(Vec3(-0.5f, -0.5f, -0.5f), Vec3(0.5f, 0.5f, 0.5f));
    Ray ray{Vec3(0.0f, 0.0f, 2.0f), Vec3(0.0f, 0.0f, -1.0f)};
    const auto hit = m.intersect(ray);
    REQUIRE(hit);
    CHECK(hit->t == doctest::Approx(1.5f));
    ray.tmax = 1.0f;
    CHECK_FALSE(m.intersect(ray));
    CHECK_FALSE(m.occluded(ray));
}

TEST_CASE("obj export round trips")
{
    const Mesh m = testing::table();
    const Mesh back = parse_obj(to_obj(m));
    CHECK(back.triangles() == m.triangles());
    REQUIRE(back.vertices().size() == m.vertices().size());
    for (std::size_t i = 0; i < m.vertices().size(); ++i) {
        CHECK((back.vertices()[i] - m.vertices()[i]).norm() == 0.0f);
    }
}

TEST_CASE("transform and merge")
{
    const Mesh a = testing::box(Vec3::Zero(), Vec3::Ones());
    const Mesh moved = a.transformed(Eigen::Matrix3f::Identity(), Vec3(2.0f, 0.0f, 0.0f));
    CHECK(moved.bounds().lo.x() == doctest::Approx(2.0f));
    const Mesh both = merge({&a, &moved});
    CHECK(both.triangle_count() == 24);
    CHECK(both.bounds().hi.x() == doctest::Approx(3.0f));
}
