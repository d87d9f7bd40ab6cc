// Renders the two-plane scene, runs the cascade with view 0 as reference and
// prints how each stage narrows the depth search.
//
//   demo_two_plane [output.pfm]

#include <cstdio>
#include <span>

#include "atv/cascade.hpp"
#include "atv/evalkit.hpp"
#include "atv/imageio.hpp"
#include "atv/synth.hpp"

int main(int argc, char** argv) {
  using namespace atv;
  const SceneSpec scene = builtin_scene("two-plane");
  const RenderedViews views = render_views(scene);

  CascadeConfig config;
  config.d_min = scene.d_min;
  config.d_max = scene.d_max;
  const auto stages = run_cascade(std::span<const ViewImage>(views.images),
                                  std::span<const CameraModel>(scene.cameras), config);

  const Mask interior = interior_mask(views.depths, scene.cameras, 0, 16);
  std::printf("stage  size      planes  mean span   MAE\n");
  for (const auto& st : stages) {
    const int f = 1 << (3 - st.stage);
    const DepthMap gt = downsample_depth(views.depths[0], f);
    const Mask valid = downsample_mask(interior, f);
    double width = 0.0;
    for (std::size_t i = 0; i < st.span.lower.pixel_count(); ++i) {
      width += st.span.upper.data()[i] - st.span.lower.data()[i];
    }
    width /= static_cast<double>(st.span.lower.pixel_count());
    const auto err = depth_error(st.estimate.depth, gt, valid, width / st.planes);
    std::printf("%-6d %3dx%-5d %-7d %-11.4f %.4f\n", st.stage, st.size.width, st.size.height, st.planes, width,
                err.mae);
  }
  if (argc > 1) {
    write_pfm(argv[1], stages.back().estimate.depth);
    std::printf("wrote %s\n", argv[1]);
  }
  return 0;
}
