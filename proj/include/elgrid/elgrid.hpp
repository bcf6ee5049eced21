#pragma once

#include "elgrid/config.hpp"
#include "elgrid/crossing_detection.hpp"
#include "elgrid/error.hpp"
#include "elgrid/evaluation.hpp"
#include "elgrid/geometry.hpp"
#include "elgrid/image.hpp"
#include "elgrid/image_io.hpp"
#include "elgrid/module_detection.hpp"
#include "elgrid/overlay.hpp"
#include "elgrid/pipeline.hpp"
#include "elgrid/result_json.hpp"
#include "elgrid/synthetic.hpp"
