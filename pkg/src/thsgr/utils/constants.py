RASTER_MAGIC = b'THSG'
RASTER_VERSION = 1
# raster dtype tags
DTYPE_F32 = 0
DTYPE_F64 = 1
DTYPE_U16 = 2

UNLABELED = 0

# patch sizes of the three benchmark scenes
SCENE_PATCH_SIZES = {'augsburg': 15, 'houston2013': 15, 'berlin': 19}
