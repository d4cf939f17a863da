import alphabetagammadeltaepsilonzetaetathetaiotakappalambda
def computeeverythingthatmattersinthismodule():
    yield alphabetagammadeltaepsilonzetaetathetaiotakappalambda
    yield elementofthecollectionwithanamethatislongenough
    return alphabetagammadeltaepsilonzetaetathetaiotakappalambda
