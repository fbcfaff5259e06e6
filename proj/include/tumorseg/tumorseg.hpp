#pragma once

#include "tumorseg/config.hpp"
#include "tumorseg/error.hpp"
#include "tumorseg/evaluate.hpp"
#include "tumorseg/fcn.hpp"
#include "tumorseg/features.hpp"
#include "tumorseg/forest.hpp"
#include "tumorseg/gabor.hpp"
#include "tumorseg/kmeans.hpp"
#include "tumorseg/morphology.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/parallel.hpp"
#include "tumorseg/phantom.hpp"
#include "tumorseg/pipeline.hpp"
#include "tumorseg/preprocess.hpp"
#include "tumorseg/score_map.hpp"
#include "tumorseg/texton.hpp"
#include "tumorseg/volume.hpp"
