use gemset::catalog::default_kinds;
use gemset::generator::{GenParams, Generator};
use gemset::geometry::Point;
use gemset::renderer::{bezel_outline, render_svg, RenderStyle};
use gemset::{Catalog, ContainerSpec, Design, Placement, Pose};

fn design(placements: Vec<Placement>) -> Design {
    Design {
        design_id: "d-0001".into(),
        seed: 1,
        params_fingerprint: "0000".into(),
        container: ContainerSpec::Circle { diameter_mm: 20.0 },
        placements,
    }
}

fn paths(svg: &str) -> Vec<(String, String, String)> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    doc.descendants()
        .filter(|n| n.has_tag_name("path"))
        .map(|n| {
            (
                n.attribute("class").unwrap_or_default().to_string(),
                n.attribute("fill").unwrap_or_default().to_string(),
                n.attribute("d").unwrap_or_default().to_string(),
            )
        })
        .collect()
}

fn coords(d: &str) -> Vec<[f64; 2]> {
    d.split_whitespace()
        .filter(|t| *t != "Z")
        .map(|t| {
            let (x, y) = t[1..].split_once(',').unwrap();
            [x.parse().unwrap(), y.parse().unwrap()]
        })
        .collect()
}

#[test]
fn empty_design_draws_only_the_container() {
    let svg = render_svg(&design(vec![]), &Catalog::builtin(), &RenderStyle::default()).unwrap();
    let p = paths(&svg);
    assert_eq!(p.len(), 1);
    assert_eq!(p[0].1, "none");
}

#[test]
fn one_stone_draws_three_paths() {
    let c = Catalog::builtin();
    let pl = Placement { kind_id: 14, shape_id: 1, size_index: 3, x: 1.0, y: -2.0, theta: 0.4 };
    let svg = render_svg(&design(vec![pl]), &c, &RenderStyle::default()).unwrap();
    let p = paths(&svg);
    assert_eq!(p.iter().map(|x| x.0.as_str()).collect::<Vec<_>>(), ["container", "bezel", "stone"]);
    assert_eq!(p[2].1, "#e0115f");
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.attribute("width"), Some("200"));
    assert_eq!(root.attribute("height"), Some("200"));
}

#[test]
fn circle_offset_grows_the_radius() {
    let r = 3.0;
    let p = gemset::Polygon::regular(64, Point::origin(), r, 0.0).unwrap();
    let q = bezel_outline(&p, 0.35).unwrap();
    for v in q.vertices() {
        assert!((v.norm() - (r + 0.35)).abs() < 1e-3, "{}", v.norm());
    }
}

#[test]
fn offsets_enlarge_every_stone() {
    let c = Catalog::builtin();
    for shape in 0..c.shapes.len() {
        for size in 0..c.sizes.len() {
            let p = c.stone_polygon(shape, size, &Pose::new(0.5, -0.25, 0.7)).unwrap();
            let q = bezel_outline(&p, 0.35).unwrap();
            assert!(q.area() > p.area(), "shape {shape} size {size}");
        }
    }
}

#[test]
fn generated_designs_render_with_catalog_colors() {
    let c = Catalog::builtin();
    let g = Generator::new(c.clone(), GenParams::default()).unwrap();
    let style = RenderStyle::default();
    for seed in 0..6 {
        let d = g.generate(&ContainerSpec::Circle { diameter_mm: 24.0 }, "d", seed).unwrap();
        let svg = render_svg(&d, &c, &style).unwrap();
        assert_eq!(svg, render_svg(&d, &c, &style).unwrap());
        let p = paths(&svg);
        let stones: Vec<_> = p.iter().filter(|x| x.0 == "stone").collect();
        let bezels = p.iter().filter(|x| x.0 == "bezel").count();
        assert_eq!(stones.len(), d.placements.len());
        assert_eq!(p.len(), 1 + bezels + stones.len());
        assert_eq!(bezels, stones.len());
        let layout = d.layout(&c).unwrap();
        for ((st, pl), path) in layout.stones.iter().zip(&d.placements).zip(&stones) {
            let k = c.kind(pl.kind_id).unwrap();
            assert_eq!(path.1, format!("#{:02x}{:02x}{:02x}", k.color[0], k.color[1], k.color[2]));
            for (v, xy) in st.polygon.vertices().iter().zip(coords(&path.2)) {
                assert!((xy[0] / 10.0 - v.x).abs() < 1e-6 && (xy[1] / 10.0 - v.y).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn textured_kinds_reference_patterns() {
    let mut kinds = default_kinds();
    kinds[2].texture = Some("textures/amethyst & co.png".into());
    let c = Catalog::new(kinds, vec![2.0, 3.0]).unwrap();
    let pl = Placement { kind_id: 2, shape_id: 0, size_index: 1, x: 0.0, y: 0.0, theta: 0.0 };
    let svg = render_svg(&design(vec![pl]), &c, &RenderStyle { background: Some([0, 0, 0]), ..RenderStyle::default() }).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert!(doc.descendants().any(|n| n.has_tag_name("pattern") && n.attribute("id") == Some("tex-2")));
    assert_eq!(paths(&svg)[2].1, "url(#tex-2)");
}

#[test]
fn bad_styles_are_rejected() {
    let d = design(vec![]);
    let c = Catalog::builtin();
    assert!(render_svg(&d, &c, &RenderStyle { px_per_mm: 0.0, ..RenderStyle::default() }).is_err());
    assert!(render_svg(&d, &c, &RenderStyle { bezel_width: -1.0, ..RenderStyle::default() }).is_err());
}
