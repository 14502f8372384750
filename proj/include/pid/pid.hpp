#pragma once

#include "pid/bench.hpp"
#include "pid/dataset.hpp"
#include "pid/detect.hpp"
#include "pid/error.hpp"
#include "pid/export.hpp"
#include "pid/filtration.hpp"
#include "pid/model_io.hpp"
#include "pid/trainer.hpp"
