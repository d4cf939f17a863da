import alphabetagammadeltaepsilonzetaetathetaiotakappalambda
def computeeverythingthatmattersinthismodule():
    if alphabetagammadeltaepsilonzetaetathetaiotakappalambda:
        return alphabetagammadeltaepsilonzetaetathetaiotakappalambda
    yield elementofthecollectionwithanamethatislongenough
